#include "mfcir/cli_io.hpp"

int main(int argc, char** argv) { return mfcir::cli::run_cli(argc, argv); }
