#include <iostream>

#include "cpinfer/cli.hpp"

int main(int argc, char** argv) { return cpinfer::cli::run(argc, argv, std::cout, std::cerr); }
