#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"
#include "factexplain/runtime.hpp"

int main(int argc, char** argv) {
  fx::configure_allocator();
  doctest::Context context(argc, argv);
  return context.run();
}
