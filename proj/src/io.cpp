#include "nnmoe/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace nnmoe::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

double parse_double(const std::string& token, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(token, &pos);
        while (pos < token.size() && std::isspace(static_cast<unsigned char>(token[pos]))) {
            ++pos;
        }
        if (pos != token.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw ParseError(where + ": cannot parse number '" + token + "'");
    }
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<double> parse_vector(const std::string& value, const std::string& where) {
    std::istringstream iss(value);
    std::vector<double> out;
    std::string token;
    while (iss >> token) out.push_back(parse_double(token, where));
    return out;
}

}  // namespace

XY read_xy_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open input file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (trim(line) != "x,y") throw ParseError(path + ": expected header 'x,y'");
    std::vector<double> xs;
    std::vector<double> ys;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        const std::size_t comma = t.find(',');
        if (comma == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'x,y' row");
        }
        const std::string where = path + ":" + std::to_string(lineno);
        const double x = parse_double(trim(t.substr(0, comma)), where);
        const double y = parse_double(trim(t.substr(comma + 1)), where);
        if (!std::isfinite(x) || !std::isfinite(y)) {
            throw ParseError(where + ": non-finite value");
        }
        xs.push_back(x);
        ys.push_back(y);
    }
    if (xs.empty()) throw ParseError(path + ": no observations");
    XY out;
    out.x = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<int>(xs.size()));
    out.y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<int>(ys.size()));
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open output file: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open input file: " + path);
    std::ostringstream oss;
    oss << in.rdbuf();
    return oss.str();
}

std::string write_model(const ModelFile& model) {
    std::ostringstream out;
    out << "format = nnmoe-model-1\n";
    out << "family = " << family_name(model.spec.family) << "\n";
    out << "K = " << model.spec.K << "\n";
    out << "p = " << model.spec.p << "\n";
    out << "q = " << model.spec.q << "\n";
    out << "loglik = " << format_double(model.loglik) << "\n";
    out << "eta = " << model.eta << "\n";
    out << "bic = " << format_double(model.bic) << "\n";
    out << "aic = " << format_double(model.aic) << "\n";
    out << "icl = " << format_double(model.icl) << "\n";
    out << "converged = " << (model.converged ? 1 : 0) << "\n";
    out << "n_iters = " << model.n_iters << "\n";
    out << "seed = " << model.seed << "\n";
    for (int k = 0; k < model.spec.K - 1; ++k) {
        out << "\n[gate " << (k + 1) << "]\n";
        out << "alpha =";
        for (int j = 0; j < model.params.gate.dim(); ++j) {
            out << " " << format_double(model.params.gate.alpha(k, j));
        }
        out << "\n";
    }
    for (int k = 0; k < model.spec.K; ++k) {
        const ExpertParams& e = model.params.experts[k];
        out << "\n[expert " << (k + 1) << "]\n";
        out << "beta =";
        for (int j = 0; j < e.beta.size(); ++j) {
            out << " " << format_double(e.beta(j));
        }
        out << "\n";
        out << "sigma2 = " << format_double(e.sigma2) << "\n";
        if (family_has_lambda(model.spec.family)) {
            out << "lambda = " << format_double(e.lambda) << "\n";
        }
        if (family_has_nu(model.spec.family)) {
            out << "nu = " << format_double(e.nu) << "\n";
        }
    }
    return out.str();
}

ModelFile parse_model(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    int section_index = 0;
    ModelFile model;
    bool saw_format = false;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            std::istringstream head(t.substr(1, t.size() - 2));
            head >> section >> section_index;
            if ((section != "gate" && section != "expert") || section_index < 1) {
                throw ParseError("model file: bad section '" + t + "'");
            }
            if (section == "expert" &&
                section_index > static_cast<int>(model.params.experts.size())) {
                model.params.experts.resize(section_index);
            }
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError("model file: expected 'key = value', got '" + t + "'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty()) {
            if (key == "format") {
                if (value != "nnmoe-model-1") {
                    throw ParseError("model file: unsupported format '" + value + "'");
                }
                saw_format = true;
            } else if (key == "family") {
                model.spec.family = family_from_name(value);
            } else if (key == "K") {
                model.spec.K = std::stoi(value);
            } else if (key == "p") {
                model.spec.p = std::stoi(value);
            } else if (key == "q") {
                model.spec.q = std::stoi(value);
            } else if (key == "loglik") {
                model.loglik = parse_double(value, "loglik");
            } else if (key == "eta") {
                model.eta = std::stoi(value);
            } else if (key == "bic") {
                model.bic = parse_double(value, "bic");
            } else if (key == "aic") {
                model.aic = parse_double(value, "aic");
            } else if (key == "icl") {
                model.icl = parse_double(value, "icl");
            } else if (key == "converged") {
                model.converged = value != "0";
            } else if (key == "n_iters") {
                model.n_iters = std::stoi(value);
            } else if (key == "seed") {
                model.seed = std::stoull(value);
            } else {
                throw ParseError("model file: unknown key '" + key + "'");
            }
        } else if (section == "gate") {
            if (key != "alpha") throw ParseError("model file: unknown gate key '" + key + "'");
            const std::vector<double> row = parse_vector(value, "alpha");
            if (model.params.gate.alpha.size() == 0) {
                model.params.gate.alpha.resize(model.spec.K - 1,
                                               static_cast<int>(row.size()));
            }
            if (section_index > model.spec.K - 1 ||
                static_cast<int>(row.size()) != model.params.gate.dim()) {
                throw ParseError("model file: gate row shape mismatch");
            }
            for (std::size_t j = 0; j < row.size(); ++j) {
                model.params.gate.alpha(section_index - 1, static_cast<int>(j)) = row[j];
            }
        } else {
            ExpertParams& e = model.params.experts[section_index - 1];
            if (key == "beta") {
                const std::vector<double> b = parse_vector(value, "beta");
                e.beta = Eigen::Map<const Eigen::VectorXd>(b.data(),
                                                           static_cast<int>(b.size()));
            } else if (key == "sigma2") {
                e.sigma2 = parse_double(value, "sigma2");
            } else if (key == "lambda") {
                e.lambda = parse_double(value, "lambda");
            } else if (key == "nu") {
                e.nu = parse_double(value, "nu");
            } else {
                throw ParseError("model file: unknown expert key '" + key + "'");
            }
        }
    }
    if (!saw_format) throw ParseError("model file: missing format line");
    model.spec.validate();
    if (static_cast<int>(model.params.experts.size()) != model.spec.K) {
        throw ParseError("model file: expected " + std::to_string(model.spec.K) +
                         " expert sections");
    }
    if (model.spec.K == 1) {
        model.params.gate = gating::GatingParams::zeros(1, model.spec.q);
    }
    if (model.params.gate.alpha.rows() != model.spec.K - 1) {
        throw ParseError("model file: expected " + std::to_string(model.spec.K - 1) +
                         " gate sections");
    }
    for (const ExpertParams& e : model.params.experts) {
        if (e.beta.size() != model.spec.p + 1 || !(e.sigma2 > 0.0)) {
            throw ParseError("model file: invalid expert parameters");
        }
    }
    return model;
}

}  // namespace nnmoe::io
