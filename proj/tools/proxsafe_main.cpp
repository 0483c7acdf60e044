#include <iostream>
#include <string>
#include <vector>

#include "proxsafe/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return proxsafe::cli::run(args, std::cout, std::cerr);
}
