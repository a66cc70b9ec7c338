#pragma once

#include <string>

#include "nnmoe/analysis.hpp"
#include "nnmoe/model.hpp"

namespace nnmoe::io {

class IoError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Serialize with 17 significant digits so that text round-trips are exact.
std::string format_double(double v);

struct XY {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
};

/// Reads a two-column CSV with header `x,y`. Throws IoError on missing file,
/// ParseError on malformed rows or non-finite values.
XY read_xy_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Everything a fit run records; enough to reproduce and to re-evaluate.
struct ModelFile {
    MoESpec spec;
    MoEParams params;
    double loglik = 0.0;
    int eta = 0;
    double bic = 0.0;
    double aic = 0.0;
    double icl = 0.0;
    bool converged = false;
    int n_iters = 0;
    std::uint64_t seed = 0;
};

std::string write_model(const ModelFile& model);
ModelFile parse_model(const std::string& text);

}  // namespace nnmoe::io
