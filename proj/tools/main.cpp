#include <iostream>

#include "sindy/cli.hpp"

int main(int argc, char** argv) { return sindy::cli::run(argc, argv, std::cout, std::cerr); }
