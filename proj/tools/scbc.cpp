#include "cli.hpp"

int main(int argc, char** argv) { return scbc::cli::run_cli(argc, argv); }
