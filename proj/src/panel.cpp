#include "countycast/panel.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "countycast/errors.hpp"

namespace countycast {

std::string fips_code(Fips f) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%05d", f);
    return buf;
}

std::optional<Fips> parse_fips(std::string_view text) {
    if (text.empty() || text.size() > 5) return std::nullopt;
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    if (v < 0 || v > 99999) return std::nullopt;
    return v;
}

ConnectednessGraph::ConnectednessGraph(
    std::vector<Fips> nodes, const std::vector<std::tuple<Fips, Fips, double>>& edges) {
    nodes_ = std::move(nodes);
    std::sort(nodes_.begin(), nodes_.end());
    nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
    for (std::size_t i = 0; i < nodes_.size(); ++i) index_[nodes_[i]] = static_cast<int>(i);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(edges.size() * 2);
    for (const auto& [a, b, w] : edges) {
        const int ia = index_of(a);
        const int ib = index_of(b);
        triplets.emplace_back(ia, ib, w);
        if (ia != ib) triplets.emplace_back(ib, ia, w);
    }
    sci_.resize(static_cast<Eigen::Index>(nodes_.size()), static_cast<Eigen::Index>(nodes_.size()));
    sci_.setFromTriplets(triplets.begin(), triplets.end());
    sci_.makeCompressed();
}

int ConnectednessGraph::index_of(Fips f) const {
    auto it = index_.find(f);
    if (it == index_.end()) throw DomainError("county " + fips_code(f) + " not in connectedness graph");
    return it->second;
}

double ConnectednessGraph::sci(Fips i, Fips j) const {
    return sci_.coeff(index_of(i), index_of(j));
}

double ConnectednessGraph::row_sum_excluding_self(int index) const {
    double sum = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(sci_, index); it; ++it) {
        if (it.row() != index) sum += it.value();
    }
    return sum;
}

std::string IngestReport::summary() const {
    std::ostringstream os;
    for (const auto& [name, counts] : sources) {
        os << name << ": read=" << counts.read << " accepted=" << counts.accepted
           << " rejected=" << counts.rejected << "\n";
    }
    os << "anomalies: " << anomalies.size() << "\n";
    os << "dropped counties: " << dropped_counties.size() << "\n";
    return os.str();
}

} // namespace countycast
