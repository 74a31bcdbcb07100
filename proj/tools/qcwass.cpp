#include <iostream>
#include <string>
#include <vector>

#include "qcwass/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return qcwass::cli::run(std::move(args), std::cout, std::cerr);
}
