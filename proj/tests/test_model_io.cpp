#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "levyflow/model_io.hpp"

using namespace levyflow;

namespace {

const BaseParams kBases[] = {GaussianParams{0.1, 1.3}, StudentTParams{3.5, -0.2, 0.9},
                             VgParams{0.05, 1.1, -0.3, 0.6}, NigParams{2.5, -0.4, 0.1, 1.2}};

std::string text_of(const FlowModel& m, const std::optional<Standardizer>& s = std::nullopt) {
  std::ostringstream os;
  write_model(os, m, s);
  return os.str();
}

ModelDocument parse(const std::string& text) {
  std::istringstream is(text);
  return read_model(is);
}

}  // namespace

TEST(ModelIo, RoundTripIsBitExact) {
  Rng rng(3);
  for (const BaseParams& base : kBases) {
    const FlowModel m = FlowModel::random(base, {3, 6, 4.5}, 0.7, rng);
    const Standardizer s(0.000431, 0.0123456789, 1234);
    const ModelDocument doc = parse(text_of(m, s));
    EXPECT_EQ(doc.model.family(), m.family());
    EXPECT_EQ(doc.model.parameters(), m.parameters());
    EXPECT_EQ(doc.model.shape().layers, 3);
    EXPECT_EQ(doc.model.shape().bins, 6);
    EXPECT_EQ(doc.model.bound(), 4.5);
    EXPECT_EQ(param_fields(doc.model.base()), param_fields(base));
    ASSERT_TRUE(doc.standardizer.has_value());
    EXPECT_EQ(doc.standardizer->mean(), s.mean());
    EXPECT_EQ(doc.standardizer->scale(), s.scale());
    EXPECT_EQ(doc.standardizer->fit_count(), 1234u);
    for (double x : {-7.0, -1.3, 0.0, 0.4, 2.2, 6.0}) EXPECT_EQ(doc.model.log_prob(x), m.log_prob(x));
    EXPECT_EQ(text_of(doc.model, doc.standardizer), text_of(m, s));
  }
}

TEST(ModelIo, ZeroLayerModelAndFileRoundTrip) {
  const FlowModel m = FlowModel::identity(VgParams{}, {0, 8, 5.0});
  const auto path = std::filesystem::temp_directory_path() / "levyflow_model_io_test.txt";
  save_model(path, m);
  const ModelDocument doc = load_model(path);
  std::filesystem::remove(path);
  EXPECT_EQ(doc.model.num_layers(), 0);
  EXPECT_FALSE(doc.standardizer.has_value());
  EXPECT_EQ(doc.model.log_prob(0.7), m.log_prob(0.7));
}

TEST(ModelIo, DocumentFormat) {
  const std::string t = text_of(FlowModel::identity(VgParams{}, {1, 2, 5.0}));
  EXPECT_EQ(t.rfind("levyflow-model 1\nfamily vg\nbase mu 0 sigma 1 theta -0.20000000000000001 nu 0.80000000000000004\n"
                    "shape 1 2 5\n",
                    0),
            0u);
  EXPECT_NE(t.find("layer 0 widths 0 0\n"), std::string::npos);
  EXPECT_EQ(t.substr(t.size() - 4), "end\n");
}

TEST(ModelIo, MalformedDocumentsNameTheLine) {
  const std::string good = text_of(FlowModel::identity(GaussianParams{}, {1, 2, 5.0}));
  const auto expect_line = [](const std::string& text, std::size_t line) {
    try {
      parse(text);
      ADD_FAILURE() << "accepted:\n" << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << e.what();
    }
  };
  expect_line("", 0);
  expect_line("not-a-model 1\n", 1);
  expect_line("levyflow-model 2\n", 1);
  expect_line("levyflow-model 1\nfamily cauchy\n", 2);
  expect_line("levyflow-model 1\nfamily gaussian\nbase mu x\n", 3);
  expect_line("levyflow-model 1\nfamily gaussian\nbogus 1\n", 3);
  expect_line("levyflow-model 1\nfamily gaussian\nshape 0 8 5\n", 3);  // no end
  expect_line("levyflow-model 1\nfamily gaussian\nshape 1 8 5\nlayer 3 widths 0\n", 4);
  expect_line("levyflow-model 1\nfamily gaussian\nshape 1 8 5\nlayer 0 knots 0\n", 4);
  expect_line("levyflow-model 1\nfamily gaussian\nbase mu 0 sigma -1\nshape 0 8 5\nend\n", 5);
  expect_line("levyflow-model 1\nfamily gaussian\nbase nu 3\nshape 0 8 5\nend\n", 5);
  // Layer arrays that do not fit the declared bin count.
  std::string wrong = good;
  wrong.replace(wrong.find("shape 1 2"), 9, "shape 1 3");
  EXPECT_THROW(parse(wrong), ParseError);
}

TEST(ModelIo, ParamsFromFields) {
  const BaseParams p = params_from_fields(Family::vg, {{"nu", 0.5}});
  const auto& vg = std::get<VgParams>(p);
  EXPECT_EQ(vg.nu, 0.5);
  EXPECT_EQ(vg.theta, -0.2);
  EXPECT_THROW(params_from_fields(Family::gaussian, {{"theta", 1.0}}), InvalidParameter);
  EXPECT_THROW(params_from_fields(Family::nig, {{"beta", 5.0}}), InvalidParameter);
}
