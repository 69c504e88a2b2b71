#include "dyco/cli.hpp"

int main(int argc, char** argv) { return dyco::dispatch(argc, argv); }
