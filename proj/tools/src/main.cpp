// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "htvgnn/cli.hpp"

int main(int argc, char** argv) { return htvgnn::cli::run(argc, argv, std::cout, std::cerr); }
