#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace jmls;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("jmls_io_" + name)).string();
}

void expect_same_model(const JmlsModel& a, const JmlsModel& b) {
  ASSERT_EQ(a.m(), b.m());
  EXPECT_EQ(a.timing, b.timing);
  EXPECT_EQ(a.transition, b.transition);
  for (std::size_t z = 0; z < a.m(); ++z) {
    EXPECT_EQ(a.modes[z].A, b.modes[z].A);
    EXPECT_EQ(a.modes[z].B, b.modes[z].B);
    EXPECT_EQ(a.modes[z].C, b.modes[z].C);
    EXPECT_EQ(a.modes[z].D, b.modes[z].D);
    EXPECT_EQ(a.modes[z].Q, b.modes[z].Q);
    EXPECT_EQ(a.modes[z].R, b.modes[z].R);
  }
}

}  // namespace

TEST(ModelJson, RoundTripIsExact) {
  for (const auto& p : {example1(), example2(), example3()}) {
    const auto path = temp_path(p.name + ".json");
    write_model(path, p.model, p.prior);
    const auto doc = read_model(path);
    expect_same_model(p.model, doc.model);
    ASSERT_EQ(doc.prior.counts(), p.prior.counts());
    for (std::size_t z = 0; z < p.prior.mode_count(); ++z) {
      for (std::size_t i = 0; i < p.prior.modes[z].size(); ++i) {
        EXPECT_NEAR(doc.prior.modes[z][i].log_weight, p.prior.modes[z][i].log_weight, 1e-15);
        EXPECT_EQ(doc.prior.modes[z][i].mean, p.prior.modes[z][i].mean);
        EXPECT_EQ(doc.prior.modes[z][i].cov, p.prior.modes[z][i].cov);
      }
    }
    std::filesystem::remove(path);
  }
}

TEST(ModelJson, TransitionIsReadColumnMajor) {
  const auto j = Json::parse(R"({
    "n": 1, "p": 1, "q": 1, "m": 2, "timing": "switch-before-prediction",
    "modes": [ {"A": [[0.5]], "B": [[1]], "C": [[1]], "D": [[0]], "Q": [[1]], "R": [[1]]},
               {"A": [[0.7]], "B": [[1]], "C": [[1]], "D": [[0]], "Q": [[1]], "R": [[1]]} ],
    "T": [[0.9, 0.1], [0.3, 0.7]],
    "prior": [ {"mode": 2, "weight": 1.0, "mean": [0], "cov": [[1]]} ]
  })");
  const auto doc = model_from_json(j);
  EXPECT_EQ(doc.model.timing, Timing::SwitchBeforePrediction);
  EXPECT_EQ(doc.model.T(1, 0), 0.1);
  EXPECT_EQ(doc.model.T(0, 1), 0.3);
  EXPECT_EQ(doc.prior.counts(), (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(validate_model(doc.model).ok());
}

TEST(ModelJson, MalformedDocumentsAreReported) {
  EXPECT_THROW(model_from_json(Json::parse(R"({"n": 1})")), FormatError);
  EXPECT_THROW(model_from_json(Json::parse(R"({
    "n": 2, "p": 1, "q": 1, "m": 1,
    "modes": [ {"A": [[1]], "B": [[1]], "C": [[1]], "D": [[0]], "Q": [[1]], "R": [[1]]} ],
    "T": [[1]] })")),
               FormatError);
  EXPECT_THROW(model_from_json(Json::parse(R"({
    "n": 1, "p": 1, "q": 1, "m": 1,
    "modes": [ {"A": [[1, 2]], "B": [[1]], "C": [[1]], "D": [[0]], "Q": [[1]], "R": [[1]]} ],
    "T": [[1]] })")),
               FormatError);
  EXPECT_THROW(read_model(temp_path("does_not_exist.json")), std::exception);
}

TEST(DatasetCsv, RoundTripWithTruth) {
  const auto p = example3();
  const Dataset data = simulate_preset(p, 4, 30);
  std::stringstream ss;
  write_dataset(ss, data);
  const Dataset back = read_dataset(ss);
  ASSERT_EQ(back.size(), data.size());
  ASSERT_TRUE(back.truth);
  for (std::size_t k = 0; k < data.size(); ++k) {
    EXPECT_EQ(back.u[k], data.u[k]);
    EXPECT_EQ(back.y[k], data.y[k]);
    EXPECT_EQ(back.truth->x[k], data.truth->x[k]);
    EXPECT_EQ(back.truth->z[k], data.truth->z[k]);
  }
}

TEST(DatasetCsv, HeaderAndIndexingAreOneBased) {
  Dataset data;
  data.u = {Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
  data.y = {Vector::Constant(1, 0.5), Vector::Constant(1, -0.5)};
  data.truth = Truth{{Vector::Constant(1, 0.1), Vector::Constant(1, 0.2)}, {0, 1}};
  std::stringstream ss;
  write_dataset(ss, data);
  EXPECT_EQ(ss.str(), "t,u_1,y_1,x_1,z\n1,1,0.5,0.10000000000000001,1\n2,2,-0.5,0.20000000000000001,2\n");
}

TEST(DatasetCsv, WithoutTruthAndMalformedInput) {
  std::istringstream ok("t,u_1,y_1,y_2\n1,0,1,2\n2,0,3,4\n");
  const Dataset d = read_dataset(ok);
  EXPECT_FALSE(d.truth);
  EXPECT_EQ(d.y[1](1), 4.0);

  std::istringstream bad_cells("t,u_1,y_1\n1,0\n");
  EXPECT_THROW(read_dataset(bad_cells), FormatError);
  std::istringstream bad_number("t,u_1,y_1\n1,0,abc\n");
  EXPECT_THROW(read_dataset(bad_number), FormatError);
  std::istringstream bad_column("t,w_1,y_1\n1,0,1\n");
  EXPECT_THROW(read_dataset(bad_column), FormatError);
  std::istringstream empty("t,u_1,y_1\n");
  EXPECT_THROW(read_dataset(empty), FormatError);
}

TEST(MixtureCsv, RoundTripIsExact) {
  const auto p = example3();
  const Dataset data = simulate_preset(p, 2, 12);
  const auto res = run_smoother(p.model, p.prior, data, {4, 4, {}});
  const auto steps = smoothed_mixtures(res.smoothed);
  std::stringstream ss;
  write_mixtures(ss, steps);
  const auto back = read_mixtures(ss);
  EXPECT_EQ(back.n, 2);
  EXPECT_EQ(back.m, 2u);
  ASSERT_EQ(back.steps.size(), steps.size());
  for (std::size_t k = 0; k < steps.size(); ++k) {
    ASSERT_EQ(back.steps[k].counts(), steps[k].counts());
    for (std::size_t z = 0; z < 2; ++z) {
      for (std::size_t i = 0; i < steps[k].modes[z].size(); ++i) {
        EXPECT_EQ(back.steps[k].modes[z][i].log_weight, steps[k].modes[z][i].log_weight);
        EXPECT_EQ(back.steps[k].modes[z][i].mean, steps[k].modes[z][i].mean);
        EXPECT_EQ(back.steps[k].modes[z][i].cov, steps[k].modes[z][i].cov);
      }
    }
  }
}

TEST(MixtureCsv, RejectsMissingHeader) {
  std::istringstream no_header("k,mode,component,log_weight,mu_1,P_1_1\n");
  EXPECT_THROW(read_mixtures(no_header), FormatError);
  std::istringstream out_of_range("# n=1 m=1 N=1\nk,mode,component,log_weight,mu_1,P_1_1\n2,1,1,0,0,1\n");
  EXPECT_THROW(read_mixtures(out_of_range), FormatError);
}

TEST(ModeMarginalCsv, OneRowPerStep) {
  const auto p = example2();
  const auto res = run_smoother(p.model, p.prior, simulate_preset(p, 1, 3), {4, 4, {}});
  std::stringstream ss;
  write_mode_marginals(ss, res.smoothed);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "k,p_1,p_2");
  int rows = 0;
  while (std::getline(ss, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(GridCsv, TwoDimensionalLayout) {
  GaussianMixture mix(1);
  mix.modes[0].push_back(GaussianComponent::from_weight(1.0, Vector::Zero(2), Matrix::Identity(2, 2)));
  const auto grid = evaluate_grid(mix, {{-1.0, 1.0, 3}, {-2.0, 2.0, 5}});
  std::stringstream ss;
  write_grid(ss, grid);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "x_1,x_2,density_1");
  std::getline(ss, line);
  EXPECT_EQ(line.substr(0, 6), "-1,-2,");
  int rows = 1;
  while (std::getline(ss, line)) ++rows;
  EXPECT_EQ(rows, 15);
}
