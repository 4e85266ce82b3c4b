#include <gtest/gtest.h>

#include "actm_observer/fundamental_diagram.hpp"
#include "fixtures.hpp"

using actm::FundamentalDiagram;

TEST(FundamentalDiagram, PublishedConstantsAreAccepted) {
  const FundamentalDiagram fd = fixtures::reference_fd();
  EXPECT_NO_THROW(fd.validate());
  EXPECT_NEAR(fd.capacity(), 0.71933361, 1e-8);
  // the two branches miss each other by about half a percent
  EXPECT_NEAR(fd.wave_speed * (fd.jam_density - fd.critical_density), 0.72267028, 1e-8);
}

TEST(FundamentalDiagram, FluxBranches) {
  const FundamentalDiagram fd = fixtures::reference_fd();
  EXPECT_DOUBLE_EQ(fd.flux(0.0), 0.0);
  EXPECT_DOUBLE_EQ(fd.flux(fd.critical_density), fd.capacity());
  EXPECT_DOUBLE_EQ(fd.flux(fd.jam_density), 0.0);
  EXPECT_DOUBLE_EQ(fd.flux(0.01), fd.free_flow_speed * 0.01);
}

TEST(FundamentalDiagram, RejectsBadParameters) {
  FundamentalDiagram fd = fixtures::reference_fd();
  fd.critical_density = 0.2;
  EXPECT_THROW(fd.validate(), actm::ModelError);
  fd = fixtures::reference_fd();
  fd.wave_speed = 0.0;
  EXPECT_THROW(fd.validate(), actm::ModelError);
  fd = fixtures::reference_fd();
  fd.wave_speed = 5.0;  // 25% discontinuity
  EXPECT_THROW(fd.validate(), actm::ModelError);
}
