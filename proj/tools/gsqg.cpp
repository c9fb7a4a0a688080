#include "gsqg/cli.hpp"

int main(int argc, char** argv) { return gsqg::cli::dispatch(argc, argv); }
