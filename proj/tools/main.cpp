#include <iostream>

#include "gsre_cli.hpp"

int main(int argc, char** argv) { return gsre::cli::run(argc, argv, std::cout, std::cerr); }
