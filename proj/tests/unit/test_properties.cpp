#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "property_checks.hpp"

using namespace kinlab::testing;

TEST_CASE("linearized operator properties over random states")
{
  for (const PropertyResult& r : operator_properties(100)) {
    INFO(r.name << ": worst " << r.worst << " over " << r.samples);
    CHECK(r.samples >= 100);
    CHECK(r.failures == 0);
  }
}

TEST_CASE("solver conserves the collision invariants over random data")
{
  const PropertyResult r = conservation_property(100);
  INFO("worst relative drift " << r.worst);
  CHECK(r.samples >= 100);
  CHECK(r.failures == 0);
}
