#include "vcs/cli.hpp"

int main(int argc, char** argv) { return vcs::run(argc, argv); }
