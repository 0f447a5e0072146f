#include "quantot/datasets.hpp"

#include "quantot/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace quantot {

Sampler gaussian_sampler(std::vector<double> mean, double tau) {
    if (mean.empty()) throw InputError("gaussian sampler needs d >= 1");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw InputError("gaussian variance must be finite and >= 0");
    Sampler s;
    s.dim = mean.size();
    std::ostringstream name;
    name << "gaussian(d=" << s.dim << ",tau=" << tau << ")";
    s.descriptor = name.str();
    const double sigma = std::sqrt(tau);
    s.draw = [mean = std::move(mean), sigma](std::size_t count, Rng& rng) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Matrix out(count, mean.size());
        for (std::size_t i = 0; i < count; ++i)
            for (std::size_t t = 0; t < mean.size(); ++t) out(i, t) = mean[t] + sigma * normal(rng);
        return out;
    };
    return s;
}

SamplerPair gaussian_pair(std::size_t d, double tau) {
    if (d == 0) throw InputError("gaussian pair needs d >= 1");
    if (!(tau > 0.0)) throw InputError("gaussian pair needs tau > 0");
    SamplerPair p{gaussian_sampler(std::vector<double>(d, 0.0), tau), gaussian_sampler(std::vector<double>(d, 1.0), tau),
                  std::sqrt(static_cast<double>(d)), {}};
    std::ostringstream name;
    name << "gaussian:d=" << d << ",tau=" << tau;
    p.descriptor = name.str();
    return p;
}

SamplerPair dirac_pair(std::size_t d) {
    if (d == 0) throw InputError("dirac pair needs d >= 1");
    auto dirac = [d](double at) {
        Sampler s;
        s.dim = d;
        s.descriptor = "dirac(" + std::to_string(at) + ")";
        s.draw = [d, at](std::size_t count, Rng&) { return Matrix(count, d, at); };
        return s;
    };
    return SamplerPair{dirac(0.0), dirac(1.0), std::sqrt(static_cast<double>(d)), "dirac:d=" + std::to_string(d)};
}

Matrix hypercube_map(const Matrix& points) {
    if (points.cols() < 2) throw InputError("hypercube map needs d >= 2");
    Matrix out = points;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t t = 0; t < 2; ++t) {
            const double x = out(i, t);
            out(i, t) = x + 2.0 * static_cast<double>((x > 0.0) - (x < 0.0));
        }
    return out;
}

SamplerPair fragmented_hypercube(std::size_t d) {
    if (d < 2) throw InputError("fragmented hypercube needs d >= 2");
    Sampler mu;
    mu.dim = d;
    mu.descriptor = "hypercube-base(d=" + std::to_string(d) + ")";
    mu.draw = [d](std::size_t count, Rng& rng) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Matrix out(count, d);
        for (std::size_t i = 0; i < count; ++i)
            for (std::size_t t = 0; t < d; ++t) out(i, t) = t < 2 ? unit(rng) - 0.5 : unit(rng);
        return out;
    };
    Sampler nu;
    nu.dim = d;
    nu.descriptor = "hypercube-mapped(d=" + std::to_string(d) + ")";
    nu.draw = [base = mu.draw](std::size_t count, Rng& rng) { return hypercube_map(base(count, rng)); };
    return SamplerPair{std::move(mu), std::move(nu), std::sqrt(8.0), "hypercube:d=" + std::to_string(d)};
}

Sampler empirical_sampler(const DiscreteMeasure& measure, std::string descriptor) {
    Sampler s;
    s.dim = measure.dim();
    s.descriptor = std::move(descriptor);
    const auto w = measure.weights();
    const std::discrete_distribution<std::size_t>::param_type weights(w.begin(), w.end());
    s.draw = [support = measure.support(), weights](std::size_t count, Rng& rng) {
        std::discrete_distribution<std::size_t> pick(weights);
        Matrix out(count, support.cols());
        for (std::size_t i = 0; i < count; ++i) {
            const auto row = support.row(pick(rng));
            std::copy(row.begin(), row.end(), out.row(i).begin());
        }
        return out;
    };
    return s;
}

std::pair<DiscreteMeasure, DiscreteMeasure> sampled_mixtures(std::size_t m, std::size_t d, double tau,
                                                             std::size_t n_tot, Rng& rng) {
    if (m == 0 || d == 0 || n_tot == 0) throw InputError("mixtures need m, d, n_tot >= 1");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw InputError("mixture variance must be finite and >= 0");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> component(0, m - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigma = std::sqrt(tau);
    auto cloud = [&] {
        Matrix means(m, d);
        for (double& v : means.values()) v = unit(rng);
        Matrix pts(n_tot, d);
        for (std::size_t i = 0; i < n_tot; ++i) {
            const std::size_t c = component(rng);
            for (std::size_t t = 0; t < d; ++t) {
                const double z = normal(rng);
                pts(i, t) = means(c, t) + sigma * z;
            }
        }
        return DiscreteMeasure::uniform(std::move(pts));
    };
    DiscreteMeasure mu = cloud();
    DiscreteMeasure nu = cloud();
    return {std::move(mu), std::move(nu)};
}

DiscreteMeasure uniform_grid(std::size_t side) {
    if (side == 0) throw InputError("grid side must be >= 1");
    Matrix pts(side * side, 2);
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            pts(r * side + c, 0) = (static_cast<double>(c) + 0.5) / static_cast<double>(side);
            pts(r * side + c, 1) = (static_cast<double>(r) + 0.5) / static_cast<double>(side);
        }
    return DiscreteMeasure::uniform(std::move(pts));
}

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool parse_number(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return in;
}

} // namespace

DiscreteMeasure load_csv_pointcloud(const std::string& path, const CsvOptions& options,
                                    std::vector<std::string>* warnings) {
    std::ifstream in = open_or_throw(path);
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    std::string line;
    std::size_t lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split_commas(line);
        std::vector<double> values(fields.size());
        std::size_t bad = fields.size();
        for (std::size_t c = 0; c < fields.size() && bad == fields.size(); ++c)
            if (!parse_number(fields[c], values[c])) bad = c;
        if (first) {
            first = false;
            width = fields.size();
            if (bad != fields.size()) {
                for (auto f : fields) header.emplace_back(f);
                continue;
            }
        }
        if (fields.size() != width)
            throw ParseError(path + ": line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                             " fields, expected " + std::to_string(width));
        if (bad != fields.size())
            throw ParseError(path + ": line " + std::to_string(lineno) + ", column " + std::to_string(bad + 1) +
                             ": '" + std::string(fields[bad]) + "' is not a number");
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw ParseError(path + ": no data rows");

    std::optional<std::size_t> wcol;
    if (options.weight_column) {
        const std::string& key = *options.weight_column;
        const auto it = std::find(header.begin(), header.end(), key);
        if (it != header.end()) {
            wcol = static_cast<std::size_t>(it - header.begin());
        } else {
            double idx = 0.0;
            if (!parse_number(key, idx) || idx < 0 || idx != std::floor(idx) || idx >= static_cast<double>(width))
                throw ParseError(path + ": no weight column '" + key + "'");
            wcol = static_cast<std::size_t>(idx);
        }
        if (width < 2) throw ParseError(path + ": the weight column leaves no coordinates");
    }

    const std::size_t d = width - (wcol ? 1 : 0);
    const std::size_t n = rows.size();
    Matrix pts(n, d);
    std::vector<double> weights(n, 1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t t = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (wcol && c == *wcol)
                weights[i] = rows[i][c];
            else
                pts(i, t++) = rows[i][c];
        }
    }
    if (wcol) {
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw ParseError(path + ": negative weight");
            total += w;
        }
        if (std::abs(total - 1.0) > kWeightSumTolerance)
            throw ParseError(path + ": weight column sums to " + std::to_string(total) + ", expected 1");
    }

    if (options.standardize) {
        for (std::size_t t = 0; t < d; ++t) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += pts(i, t);
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) var += (pts(i, t) - mean) * (pts(i, t) - mean);
            var /= static_cast<double>(n);
            const double sd = std::sqrt(var);
            if (sd == 0.0) {
                const std::string msg = path + ": column " + std::to_string(t + 1) + " is constant; centred only";
                if (warnings)
                    warnings->push_back(msg);
                else
                    std::cerr << "warning: " << msg << '\n';
            }
            for (std::size_t i = 0; i < n; ++i) pts(i, t) = sd > 0.0 ? (pts(i, t) - mean) / sd : pts(i, t) - mean;
        }
    }
    return DiscreteMeasure(std::move(pts), std::move(weights));
}

DiscreteMeasure load_grid_image(const std::string& path) {
    std::ifstream in = open_or_throw(path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
    }
    if (tokens.empty() || tokens[0] != "P2") throw ParseError(path + ": not a plain PGM (missing P2 magic)");
    if (tokens.size() < 4) throw ParseError(path + ": truncated PGM header");
    auto integer = [&](const std::string& tok, const char* what) {
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0)
            throw ParseError(path + ": bad " + what + " '" + tok + "'");
        return v;
    };
    const long long W = integer(tokens[1], "width");
    const long long H = integer(tokens[2], "height");
    const long long maxval = integer(tokens[3], "maxval");
    if (W == 0 || H == 0 || maxval == 0 || maxval > 65535) throw ParseError(path + ": malformed PGM header");
    const auto count = static_cast<std::size_t>(W * H);
    if (tokens.size() != 4 + count)
        throw ParseError(path + ": expected " + std::to_string(count) + " pixels, found " +
                         std::to_string(tokens.size() - 4));

    Matrix pts(0, 2);
    std::vector<double> intensity;
    double total = 0.0;
    for (long long r = 0; r < H; ++r)
        for (long long c = 0; c < W; ++c) {
            const long long v = integer(tokens[4 + static_cast<std::size_t>(r * W + c)], "pixel");
            if (v > maxval) throw ParseError(path + ": pixel exceeds maxval");
            if (v == 0) continue;
            const double xy[2] = {(static_cast<double>(c) + 0.5) / static_cast<double>(W),
                                  (static_cast<double>(r) + 0.5) / static_cast<double>(H)};
            pts.append_row(xy);
            intensity.push_back(static_cast<double>(v));
            total += static_cast<double>(v);
        }
    if (intensity.empty()) throw InputError(path + ": empty measure (all pixels are zero)");
    for (double& w : intensity) w /= total;
    return DiscreteMeasure(std::move(pts), std::move(intensity));
}

} // namespace quantot
