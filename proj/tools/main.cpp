#include "commands.hpp"

int main(int argc, char** argv) { return penmix::cli::run(argc, argv); }
