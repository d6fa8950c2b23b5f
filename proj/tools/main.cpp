#include "adathresh/harness.hpp"

int main(int argc, char** argv) { return adathresh::cli_main(argc, argv); }
