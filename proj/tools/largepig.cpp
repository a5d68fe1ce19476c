// SPDX-License-Identifier: Apache-2.0
#include "largepig/cli.hpp"

int main(int argc, char** argv) { return largepig::cli::run(argc, argv); }
