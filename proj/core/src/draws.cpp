#include "pmcmc/draws.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <system_error>

namespace pmcmc {

void DrawStore::reserve(std::size_t n) {
  chain_.reserve(n);
  iter_.reserve(n);
  burnin_.reserve(n);
  values_.reserve(n * static_cast<std::size_t>(dim_));
}

void DrawStore::append(int chain, std::int64_t iter, const Vector& theta, bool burnin) {
  check_dim("DrawStore::append", dim_, theta.size());
  auto [it, inserted] = last_iter_.emplace(chain, iter);
  if (!inserted) {
    if (iter <= it->second)
      throw Error("DrawStore: iterations must be strictly increasing within chain " +
                  std::to_string(chain));
    it->second = iter;
  }
  chain_.push_back(chain);
  iter_.push_back(iter);
  burnin_.push_back(burnin ? 1 : 0);
  values_.insert(values_.end(), theta.data(), theta.data() + theta.size());
}

std::size_t DrawStore::post_burnin_count() const {
  return static_cast<std::size_t>(std::count(burnin_.begin(), burnin_.end(), std::uint8_t{0}));
}

std::vector<int> DrawStore::chain_ids() const {
  std::set<int> ids(chain_.begin(), chain_.end());
  return {ids.begin(), ids.end()};
}

void DrawStore::merge(const DrawStore& other, bool sort) {
  if (other.empty()) return;
  if (empty() && dim_ != other.dim_ && chain_.empty()) dim_ = other.dim_;
  check_dim("DrawStore::merge", dim_, other.dim_);
  chain_.insert(chain_.end(), other.chain_.begin(), other.chain_.end());
  iter_.insert(iter_.end(), other.iter_.begin(), other.iter_.end());
  burnin_.insert(burnin_.end(), other.burnin_.begin(), other.burnin_.end());
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
  if (sort) canonical_sort();
}

void DrawStore::canonical_sort() {
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return chain_[a] != chain_[b] ? chain_[a] < chain_[b] : iter_[a] < iter_[b];
  });
  DrawStore sorted(dim_);
  sorted.normalization = normalization;
  sorted.reserve(size());
  for (std::size_t i : order) {
    sorted.chain_.push_back(chain_[i]);
    sorted.iter_.push_back(iter_[i]);
    sorted.burnin_.push_back(burnin_[i]);
    const double* row = values_.data() + i * static_cast<std::size_t>(dim_);
    sorted.values_.insert(sorted.values_.end(), row, row + dim_);
  }
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted.chain_[i] == sorted.chain_[i - 1] && sorted.iter_[i] == sorted.iter_[i - 1])
      throw Error("DrawStore: duplicate iteration " + std::to_string(sorted.iter_[i]) +
                  " in chain " + std::to_string(sorted.chain_[i]));
  sorted.last_iter_.clear();
  for (std::size_t i = 0; i < sorted.size(); ++i) sorted.last_iter_[sorted.chain_[i]] = sorted.iter_[i];
  *this = std::move(sorted);
}

DrawStore DrawStore::post_burnin() const {
  DrawStore out(dim_);
  out.normalization = normalization;
  for (std::size_t i = 0; i < size(); ++i)
    if (!is_burnin(i)) out.append(chain(i), iter(i), theta(i), false);
  return out;
}

DrawStore DrawStore::prefix(std::int64_t max_iter) const {
  DrawStore out(dim_);
  out.normalization = normalization;
  for (std::size_t i = 0; i < size(); ++i)
    if (iter(i) <= max_iter) out.append(chain(i), iter(i), theta(i), is_burnin(i));
  return out;
}

DrawStore DrawStore::first_post_burnin(std::int64_t per_chain) const {
  DrawStore out(dim_);
  out.normalization = normalization;
  std::map<int, std::int64_t> taken;
  for (std::size_t i = 0; i < size(); ++i) {
    if (is_burnin(i)) continue;
    auto& n = taken[chain(i)];
    if (n >= per_chain) continue;
    ++n;
    out.append(chain(i), iter(i), theta(i), false);
  }
  return out;
}

Matrix DrawStore::post_burnin_matrix() const {
  Matrix m(static_cast<Eigen::Index>(post_burnin_count()), dim_);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < size(); ++i)
    if (!is_burnin(i)) m.row(r++) = theta(i).transpose();
  return m;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

template <class T>
T parse_number(std::string_view s, const std::filesystem::path& path) {
  T v{};
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(path.string() + ": malformed number '" + std::string(s) + "'");
  return v;
}

}  // namespace

void write_draws_csv(const std::filesystem::path& path, const DrawStore& draws) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  std::string line = "chain,iter";
  for (int j = 1; j <= draws.dim(); ++j) line += ",theta_" + std::to_string(j);
  line += ",is_burnin\n";
  out << line;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    line.clear();
    line += std::to_string(draws.chain(i));
    line += ',';
    line += std::to_string(draws.iter(i));
    const auto th = draws.theta(i);
    for (int j = 0; j < draws.dim(); ++j) {
      line += ',';
      append_double(line, th[j]);
    }
    line += draws.is_burnin(i) ? ",1\n" : ",0\n";
    out << line;
  }
  if (!out) throw Error("error writing " + path.string());
}

DrawStore read_draws_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read draws " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string_view> cols;
  {
    std::string_view h(line);
    std::size_t pos = 0;
    while (true) {
      const auto next = h.find(',', pos);
      cols.push_back(h.substr(pos, next - pos));
      if (next == std::string_view::npos) break;
      pos = next + 1;
    }
  }
  if (cols.size() < 4 || cols.front() != "chain" || cols[1] != "iter" || cols.back() != "is_burnin")
    throw Error(path.string() + ": expected header chain,iter,theta_1..theta_p,is_burnin");
  const int p = static_cast<int>(cols.size()) - 3;
  for (int j = 0; j < p; ++j)
    if (cols[static_cast<std::size_t>(j) + 2] != "theta_" + std::to_string(j + 1))
      throw Error(path.string() + ": unexpected column name");
  DrawStore draws(p);
  Vector theta(p);
  std::vector<std::string_view> cells;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    cells.clear();
    std::string_view l(line);
    std::size_t pos = 0;
    while (true) {
      const auto next = l.find(',', pos);
      cells.push_back(l.substr(pos, next - pos));
      if (next == std::string_view::npos) break;
      pos = next + 1;
    }
    if (cells.size() != cols.size()) throw Error(path.string() + ": ragged row");
    for (int j = 0; j < p; ++j) theta[j] = parse_number<double>(cells[static_cast<std::size_t>(j) + 2], path);
    const int flag = parse_number<int>(cells.back(), path);
    if (flag != 0 && flag != 1) throw Error(path.string() + ": is_burnin must be 0 or 1");
    draws.append(parse_number<int>(cells[0], path), parse_number<std::int64_t>(cells[1], path), theta,
                 flag == 1);
  }
  return draws;
}

DrawStore read_draws_csv(std::span<const std::filesystem::path> paths) {
  if (paths.empty()) throw Error("read_draws_csv: no files");
  DrawStore all = read_draws_csv(paths.front());
  for (std::size_t i = 1; i < paths.size(); ++i) all.merge(read_draws_csv(paths[i]));
  all.canonical_sort();
  return all;
}

}  // namespace pmcmc
