#include "kear/cli.hpp"

int main(int argc, char** argv) { return kear::cli::run(argc, argv); }
