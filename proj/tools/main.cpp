#include "sfie/cli.hpp"

int main(int argc, char** argv) { return sfie::cli::run(argc, argv); }
