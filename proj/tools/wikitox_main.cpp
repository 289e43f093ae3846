#include <iostream>

#include "wikitox/cli.hpp"

int main(int argc, char** argv) { return wikitox::cli_dispatch(argc, argv, std::cout, std::cerr); }
