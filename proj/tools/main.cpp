#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return h2mor::cli::run(argc, argv, std::cout, std::cerr); }
