#include <string>
#include <vector>

#include "dtmc/cli.hpp"

int main(int argc, char** argv) {
    return dtmc::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
