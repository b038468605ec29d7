#include "doctest.h"

#include "eblime/errors.hpp"
#include "eblime/oracle.hpp"
#include "eblime/perturbation.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace eblime;
using namespace eblime::perturbation;

TEST_CASE("generate_masks: forced all-ones row") {
  const Matrix Z = generate_masks(3, 1, 99, true);
  REQUIRE(Z.rows() == 1);
  CHECK(Z.row(0).isOnes());
}

TEST_CASE("generate_masks: column means obey the law of large numbers") {
  // P(|mean - 0.5| > 0.03) for Binomial(4096, 1/2) is about 1e-4 per column.
  const Matrix Z = generate_masks(8, 4096, 7, false);
  for (Eigen::Index j = 0; j < 8; ++j) CHECK(std::abs(Z.col(j).mean() - 0.5) < 0.03);
  CHECK(((Z.array() == 0.0) || (Z.array() == 1.0)).all());
}

TEST_CASE("generate_masks: determinism and seed sensitivity") {
  CHECK(generate_masks(10, 300, 5, true) == generate_masks(10, 300, 5, true));
  CHECK(generate_masks(10, 300, 5, true) != generate_masks(10, 300, 6, true));
  // Row i depends only on (seed, i): a longer run extends a shorter one.
  const Matrix shortZ = generate_masks(70, 20, 3, false);
  const Matrix longZ = generate_masks(70, 50, 3, false);
  CHECK(longZ.topRows(20) == shortZ);
}

TEST_CASE("generate_masks: invalid sizes") {
  CHECK_THROWS_AS(generate_masks(0, 5, 1, true), InvalidInput);
  CHECK_THROWS_AS(generate_masks(3, 0, 1, true), InvalidInput);
}

TEST_CASE("kernel weights: closed forms") {
  Matrix Z(2, 6);
  Z << 1, 1, 1, 1, 1, 1,  //
      0, 0, 1, 0, 0, 1;
  const Vector w = kernel_weights(Z, {2.0, Distance::euclidean});
  CHECK(w[0] == 1.0);
  CHECK(w[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(kernel_weights(Z.topRows(1), {0.01, Distance::cosine})[0] == 1.0);
}

TEST_CASE("kernel weights: full enumeration matches direct recomputation") {
  const Matrix Z = oracle::enumerate_masks(4);
  REQUIRE(Z.rows() == 16);
  const Vector w = kernel_weights(Z, {1.0, Distance::euclidean});
  for (Eigen::Index i = 0; i < 16; ++i) {
    double zeros = 0.0;
    for (Eigen::Index j = 0; j < 4; ++j) zeros += Z(i, j) == 0.0 ? 1.0 : 0.0;
    CHECK(w[i] == std::exp(-zeros / 1.0));
  }
}

TEST_CASE("kernel weights: cosine distance") {
  Matrix Z(3, 4);
  Z << 1, 1, 0, 0,  //
      1, 0, 0, 0,   //
      0, 0, 0, 0;
  const Vector w = kernel_weights(Z, {0.5, Distance::cosine});
  const double d1 = 1.0 - std::sqrt(0.5);
  const double d2 = 1.0 - std::sqrt(0.25);
  CHECK(w[0] == doctest::Approx(std::exp(-d1 * d1 / 0.25)));
  CHECK(w[1] == doctest::Approx(std::exp(-d2 * d2 / 0.25)));
  CHECK(w[2] == doctest::Approx(std::exp(-1.0 / 0.25)));
}

TEST_CASE("kernel config validation and defaults") {
  CHECK_THROWS_AS(KernelConfig({0.0, Distance::euclidean}).validate(), InvalidInput);
  CHECK_THROWS_AS(KernelConfig({-1.0, Distance::euclidean}).validate(), InvalidInput);
  CHECK(KernelConfig::defaults_for(16).theta == doctest::Approx(1.0));
  CHECK(KernelConfig::defaults_for(16).distance == Distance::euclidean);
  CHECK(parse_distance("cosine") == Distance::cosine);
  CHECK_THROWS_AS(parse_distance("manhattan"), InvalidInput);
}

TEST_CASE("grid_segment partitions") {
  SUBCASE("exact division") {
    const auto l = grid_segment(4, 4, 2, 2);
    const std::vector<int> expect{0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3};
    CHECK(l == expect);
  }
  SUBCASE("remainder goes to the leading block rows") {
    const auto l = grid_segment(5, 4, 2, 2);
    int top = 0;
    for (int y = 0; y < 5; ++y) top += l[static_cast<std::size_t>(y) * 4] == 0 ? 1 : 0;
    CHECK(top == 3);
  }
  SUBCASE("single block") { CHECK(grid_segment(1, 1, 1, 1) == std::vector<int>{0}); }
  SUBCASE("labels are surjective") {
    const auto l = grid_segment(17, 23, 4, 5);
    CHECK(std::set<int>(l.begin(), l.end()).size() == 20);
  }
  SUBCASE("bad dimensions") {
    CHECK_THROWS_AS(grid_segment(0, 4, 1, 1), InvalidInput);
    CHECK_THROWS_AS(grid_segment(4, 4, 5, 1), InvalidInput);
  }
}

TEST_CASE("apply_mask on a segmented image") {
  // 2x2 image, left column is segment 0, right column segment 1.
  const auto space = FeatureSpace::segmented(2, 2, 1, {0, 1, 0, 1});
  const Instance img{0.1, 0.2, 0.3, 0.4};
  CHECK(apply_mask(space, img, std::vector<double>{1, 1}) == img);
  CHECK(apply_mask(space, img, std::vector<double>{0, 0}) == Instance{0, 0, 0, 0});
  CHECK(apply_mask(space, img, std::vector<double>{1, 0}) == Instance{0.1, 0.0, 0.3, 0.0});
  CHECK_THROWS_AS(apply_mask(space, img, std::vector<double>{1}), InvalidInput);
  CHECK_THROWS_AS(apply_mask(space, Instance{0.1}, std::vector<double>{1, 1}), InvalidInput);
}

TEST_CASE("apply_mask with channels and a fill value") {
  const auto space = FeatureSpace::segmented(1, 2, 2, {0, 1}, 0.5);
  const Instance img{1, 2, 3, 4};
  CHECK(apply_mask(space, img, std::vector<double>{0, 1}) == Instance{0.5, 0.5, 3, 4});
}

TEST_CASE("feature space invariants") {
  CHECK_THROWS_AS(FeatureSpace::segmented(1, 3, 1, {0, 2, 2}), InvalidInput);  // label 1 unused
  CHECK_THROWS_AS(FeatureSpace::segmented(1, 3, 1, {0, 1}), InvalidInput);
  CHECK_THROWS_AS(FeatureSpace::abstract(0), InvalidInput);
  CHECK(FeatureSpace::segmented(1, 3, 1, {1, 0, 1}).p == 2);
}

TEST_CASE("weights are recomputable from a mask matrix") {
  const KernelConfig cfg{1.3, Distance::euclidean};
  const Matrix Z = generate_masks(9, 64, 4, true);
  const Vector w = kernel_weights(Z, cfg);
  // Round-trip the masks through text, as a serialized set would be.
  std::ostringstream os;
  os.precision(17);
  os << Z;
  std::istringstream is(os.str());
  Matrix Z2(64, 9);
  for (Eigen::Index i = 0; i < 64; ++i)
    for (Eigen::Index j = 0; j < 9; ++j) is >> Z2(i, j);
  CHECK(kernel_weights(Z2, cfg) == w);
  CHECK((w.array() > 0.0).all());
  CHECK((w.array() <= 1.0).all());
}

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("eblime_test_" + std::to_string(::getpid()) + "_" + name);
}

void write_png(const std::string& path, int w, int h, int color_type, const std::vector<unsigned char>& data) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  REQUIRE(fp != nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, fp);
  png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<unsigned char*>(data.data() + static_cast<std::size_t>(y) * w * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

TEST_CASE("PGM round trip") {
  Image img;
  img.height = 2;
  img.width = 3;
  img.pixels = {0.0, 1.0, 0.5, 0.25, 0.75, 1.0};
  const auto path = temp_path("rt.pgm").string();
  write_pgm(path, img);
  const Image back = read_image(path);
  CHECK(back.height == 2);
  CHECK(back.width == 3);
  CHECK(back.channels == 1);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(back.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(0.003));
  std::filesystem::remove(path);
}

TEST_CASE("PGM with comments and maxval") {
  const auto path = temp_path("c.pgm").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n# a comment\n2 1\n# another\n100\n";
    out.put(static_cast<char>(0));
    out.put(static_cast<char>(100));
  }
  const Image img = read_pgm(path);
  CHECK(img.pixels == std::vector<double>{0.0, 1.0});
  std::filesystem::remove(path);
}

TEST_CASE("PNG grayscale and RGB input") {
  const auto gray = temp_path("g.png").string();
  write_png(gray, 2, 2, PNG_COLOR_TYPE_GRAY, {0, 255, 51, 102});
  const Image g = read_image(gray);
  CHECK(g.height == 2);
  CHECK(g.width == 2);
  CHECK(g.pixels[1] == doctest::Approx(1.0));
  CHECK(g.pixels[2] == doctest::Approx(0.2));
  std::filesystem::remove(gray);

  const auto rgb = temp_path("c.png").string();
  write_png(rgb, 1, 1, PNG_COLOR_TYPE_RGB, {255, 255, 255});
  const Image c = read_png(rgb);
  CHECK(c.width == 1);
  CHECK(c.pixels.size() == c.size());
  CHECK(c.pixels[0] == doctest::Approx(1.0));
  std::filesystem::remove(rgb);
}

TEST_CASE("image readers reject garbage") {
  const auto path = temp_path("bad.pgm").string();
  {
    std::ofstream out(path);
    out << "not an image";
  }
  CHECK_THROWS_AS(read_image(path), InvalidInput);
  CHECK_THROWS_AS(read_png(path), InvalidInput);
  CHECK_THROWS_AS(read_image(temp_path("missing.pgm").string()), InvalidInput);
  std::filesystem::remove(path);
}

TEST_CASE("segment map export") {
  CHECK(segment_map_csv({0, 1, 2, 3}, 2, 2) == "0,1\n2,3\n");
  CHECK_THROWS_AS(segment_map_csv({0, 1}, 2, 2), InvalidInput);
}
