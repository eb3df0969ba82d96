#include <iostream>

#include "apufsim/cli.hpp"

int main(int argc, char **argv) { return apufsim::cli::run(argc, argv, std::cout, std::cerr); }
