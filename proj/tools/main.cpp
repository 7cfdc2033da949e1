#include "streamkv/cli.hpp"

int main(int argc, char** argv) { return streamkv::cli::run_cli(argc, argv); }
