#include "rstripe/cli.hpp"

int main(int argc, char** argv) { return rstripe::cli(argc, argv); }
