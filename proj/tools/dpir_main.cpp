#include "dpir/cli.hpp"

int main(int argc, char** argv) { return dpir::cli::dispatch(argc, argv); }
