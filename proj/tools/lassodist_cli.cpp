#include <iostream>

#include "lassodist/cli.hpp"

int main(int argc, char** argv) { return lassodist::cli::dispatch(argc, argv, std::cout, std::cerr); }
