#include "vpb/config.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return vpb::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
