#include "trikey/cli.hpp"

int main(int argc, char** argv) { return trikey::cli::run(argc, argv); }
