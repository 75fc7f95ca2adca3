// SPDX-License-Identifier: MIT
#include "vexsde/cli/cli.hpp"

int main(int argc, char** argv) { return vexsde::cli::run(argc, argv); }
