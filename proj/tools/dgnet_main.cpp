#include "dgnet/cli.hpp"

int main(int argc, char** argv) { return dgnet::cli::run(argc, argv); }
