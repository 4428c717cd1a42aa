#include <iostream>

#include "lexrag/cli.hpp"

int main(int argc, char** argv) { return lexrag::cli::run(argc, argv, std::cout, std::cerr); }
