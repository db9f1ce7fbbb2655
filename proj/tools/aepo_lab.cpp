#include "aepo/cli.hpp"

int main(int argc, char** argv) { return aepo::cli::run_cli(argc, argv); }
