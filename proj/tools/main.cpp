// SPDX-License-Identifier: Apache-2.0
#include "ecctlin/bench.hpp"

int main(int argc, char** argv) { return ecctlin::cli_main(argc, argv); }
