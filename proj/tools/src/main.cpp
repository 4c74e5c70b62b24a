#include "blockdetail/service/cli.h"

#include <iostream>

int main(int argc, char** argv) {
  return blockdetail::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
