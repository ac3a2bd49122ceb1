#include <string>
#include <vector>

#include "jointrec/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return jointrec::cli::run(args);
}
