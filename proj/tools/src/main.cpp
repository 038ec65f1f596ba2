#include <iostream>

#include "qrt/cli/app.hpp"

int main(int argc, char** argv) {
  return qrt::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
