#include <iostream>

#include "cbsde/run.hpp"

int main(int argc, char** argv) {
    try {
        return cbsde::run_command(argc, argv, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << '\n';
        return 1;
    }
}
