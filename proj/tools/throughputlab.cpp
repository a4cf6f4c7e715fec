#include <iostream>

#include "throughputlab/cli.hpp"

int main(int argc, char** argv) { return tlab::cli::dispatch(argc, argv, std::cout, std::cerr); }
