// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "tintin/harness/cli.hpp"

int main(int argc, char** argv) { return tintin::run_cli(argc, argv, std::cout, std::cerr); }
