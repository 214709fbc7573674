#include "dqcut/cli.hpp"

int main(int argc, char** argv) { return dqcut::run_cli(argc, argv); }
