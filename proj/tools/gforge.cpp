#include <iostream>

#include "gforge/cli.hpp"

int main(int argc, char** argv) { return gforge::cli_main(argc, argv, std::cout, std::cerr); }
