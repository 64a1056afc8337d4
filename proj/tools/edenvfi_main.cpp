#include <iostream>

#include "edenvfi/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return edenvfi::run_cli(args, std::cout, std::cerr);
}
