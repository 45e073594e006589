#include <iostream>

#include "swd/cli.hpp"

int main(int argc, char** argv) { return swd::cli::dispatch(argc, argv, std::cout, std::cerr); }
