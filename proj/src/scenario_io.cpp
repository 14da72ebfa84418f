#include "canopy_reach/scenario_io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace canopy_reach {
namespace {

using json = nlohmann::json;

/// Walks a JSON object while remembering the path for error messages.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

  bool has(const std::string& key) const {
    return node_.is_object() && node_.contains(key) && !node_.at(key).is_null();
  }

  Reader child(const std::string& key) const {
    if (!has(key)) throw ScenarioError(join(key), "missing field");
    return Reader(node_.at(key), join(key));
  }

  Reader at(std::size_t i) const {
    return Reader(node_.at(i), path_ + "[" + std::to_string(i) + "]");
  }

  std::size_t arraySize() const {
    if (!node_.is_array()) throw ScenarioError(path_, "expected an array");
    return node_.size();
  }

  double number() const {
    if (!node_.is_number()) throw ScenarioError(path_, "expected a number");
    return node_.get<double>();
  }

  double number(const std::string& key, double fallback) const {
    return has(key) ? child(key).number() : fallback;
  }

  double requiredNumber(const std::string& key) const { return child(key).number(); }

  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_integer()) throw ScenarioError(join(key), "expected an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_boolean()) throw ScenarioError(join(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_string()) throw ScenarioError(join(key), "expected a string");
    return v.get<std::string>();
  }

  Vec3 vec3() const {
    if (!node_.is_array() || node_.size() != 3) {
      throw ScenarioError(path_, "expected an array of 3 numbers");
    }
    return {at(0).number(), at(1).number(), at(2).number()};
  }

  Vec3 vec3(const std::string& key, const Vec3& fallback) const {
    return has(key) ? child(key).vec3() : fallback;
  }

  Mat3 mat3() const {
    if (arraySize() != 3) throw ScenarioError(path_, "expected 3 rows");
    Mat3 m;
    for (int r = 0; r < 3; ++r) m.row(r) = at(r).vec3().transpose();
    return m;
  }

  const std::string& path() const { return path_; }

 private:
  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& node_;
  std::string path_;
};

json toJson(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json toJson(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(toJson(Vec3(m.row(r).transpose())));
  return rows;
}

CrossSection parseCrossSection(const Reader& r, const std::string& s) {
  if (s == "circular") return CrossSection::circular;
  if (s == "square") return CrossSection::square;
  throw ScenarioError(r.path() + ".crossSection", "expected 'circular' or 'square'");
}

BranchSpec parseBranch(const Reader& r) {
  BranchSpec b;
  b.crossSection = parseCrossSection(r, r.string("crossSection", "circular"));
  b.dimension = r.requiredNumber("dimension");
  b.length = r.requiredNumber("length");
  b.particleCount = r.integer("particleCount", b.particleCount);
  if (r.has("attachment")) {
    const Reader a = r.child("attachment");
    b.attachmentPosition = a.child("position").vec3();
    b.attachmentRpy = a.vec3("rpy", Vec3::Zero());
  }
  b.orientationDeg = r.number("orientationDeg", 0.0);
  b.externalJointStiffness = r.number("externalJointStiffness", b.externalJointStiffness);
  b.internalJointStiffness = r.number("internalJointStiffness", 0.0);
  b.breakAngle = r.number("breakAngle", b.breakAngle);
  if (r.has("leaves")) {
    const Reader leaves = r.child("leaves");
    for (std::size_t i = 0; i < leaves.arraySize(); ++i) {
      const Reader lr = leaves.at(i);
      LeafSpec leaf;
      leaf.attachParticleIndex = lr.integer("attachParticleIndex", 0);
      leaf.petioleStiffness = lr.number("petioleStiffness", leaf.petioleStiffness);
      const Reader he = lr.child("patchHalfExtents");
      if (he.arraySize() != 2) throw ScenarioError(he.path(), "expected 2 numbers");
      leaf.patchHalfExtents = {he.at(0).number(), he.at(1).number()};
      leaf.patchNormal = lr.vec3("patchNormal", Vec3::UnitX());
      b.leaves.push_back(leaf);
    }
  }
  try {
    validateBranchSpec(b);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(r.path(), e.what());
  }
  return b;
}

json branchToJson(const BranchSpec& b) {
  json j;
  j["crossSection"] = b.crossSection == CrossSection::circular ? "circular" : "square";
  j["dimension"] = b.dimension;
  j["length"] = b.length;
  j["particleCount"] = b.particleCount;
  j["attachment"] = {{"position", toJson(b.attachmentPosition)}, {"rpy", toJson(b.attachmentRpy)}};
  j["orientationDeg"] = b.orientationDeg;
  j["externalJointStiffness"] = b.externalJointStiffness;
  if (b.internalJointStiffness > 0.0) j["internalJointStiffness"] = b.internalJointStiffness;
  j["breakAngle"] = b.breakAngle;
  json leaves = json::array();
  for (const auto& l : b.leaves) {
    leaves.push_back({{"attachParticleIndex", l.attachParticleIndex},
                      {"petioleStiffness", l.petioleStiffness},
                      {"patchHalfExtents", {l.patchHalfExtents[0], l.patchHalfExtents[1]}},
                      {"patchNormal", toJson(l.patchNormal)}});
  }
  j["leaves"] = leaves;
  return j;
}

ArmSetup parseArm(const Reader& r, const Vec3& initialPosition) {
  ArmSetup setup;
  const bool reference = r.string("model", "") == "reference";
  if (reference) {
    // Based so that the home pose puts the end-effector at initialPosition.
    setup.model = referenceArm();
    const Vec3 home = forwardKinematics(setup.model, referenceArmHome()).position;
    setup.model.basePosition = r.vec3("basePosition", initialPosition - home);
  } else {
    const Reader dh = r.child("dh");
    for (std::size_t i = 0; i < dh.arraySize(); ++i) {
      const Reader row = dh.at(i);
      setup.model.dh.push_back({row.requiredNumber("a"), row.requiredNumber("alpha"),
                                row.requiredNumber("d"), row.number("thetaOffset", 0.0)});
    }
    if (r.has("jointLimits")) {
      const Reader lim = r.child("jointLimits");
      for (std::size_t i = 0; i < lim.arraySize(); ++i) {
        const Reader pair = lim.at(i);
        if (pair.arraySize() != 2) throw ScenarioError(pair.path(), "expected [lower, upper]");
        setup.model.limits.push_back({pair.at(0).number(), pair.at(1).number()});
      }
    } else {
      setup.model.limits.assign(setup.model.dh.size(), JointLimit{});
    }
    setup.model.basePosition = r.vec3("basePosition", Vec3::Zero());
    if (r.has("baseRotation")) setup.model.baseRotation = r.child("baseRotation").mat3();
    if (r.has("toolRotation")) setup.model.toolRotation = r.child("toolRotation").mat3();
  }
  try {
    validateArmModel(setup.model);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(r.path(), e.what());
  }

  if (r.has("initialJoints")) {
    const Reader q = r.child("initialJoints");
    setup.initialJoints.resize(static_cast<Eigen::Index>(q.arraySize()));
    for (std::size_t i = 0; i < q.arraySize(); ++i) setup.initialJoints(i) = q.at(i).number();
    if (setup.initialJoints.size() != setup.model.dof()) {
      throw ScenarioError(q.path(), "expected one angle per joint");
    }
  } else {
    const Vector seed = reference ? referenceArmHome() : Vector(Vector::Zero(setup.model.dof()));
    double residual = 0.0;
    setup.initialJoints = solvePositionIk(setup.model, seed, initialPosition, 500, &residual);
    if (residual > 1e-6) {
      throw ScenarioError(r.path(), "initialPosition is not reachable by the arm");
    }
  }
  return setup;
}

json armToJson(const ArmSetup& a) {
  json j;
  json dh = json::array();
  for (const auto& p : a.model.dh) {
    dh.push_back({{"a", p.a}, {"alpha", p.alpha}, {"d", p.d}, {"thetaOffset", p.thetaOffset}});
  }
  j["dh"] = dh;
  json lim = json::array();
  for (const auto& l : a.model.limits) lim.push_back({l.lower, l.upper});
  j["jointLimits"] = lim;
  j["basePosition"] = toJson(a.model.basePosition);
  j["baseRotation"] = toJson(a.model.baseRotation);
  j["toolRotation"] = toJson(a.model.toolRotation);
  json q = json::array();
  for (Eigen::Index i = 0; i < a.initialJoints.size(); ++i) q.push_back(a.initialJoints(i));
  j["initialJoints"] = q;
  return j;
}

std::string csvQuote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> splitCsvLine(const std::string& line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else if (c != '\r') {
      cells.back() += c;
    }
  }
  return cells;
}

std::ofstream openForWrite(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

Scenario parseScenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // Convert the byte offset into a line number for the message.
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    throw ScenarioError("", "JSON syntax error at line " + std::to_string(line) + ": " + e.what());
  }
  const Reader r(root, "");
  if (!root.is_object()) throw ScenarioError("", "scenario must be a JSON object");
  if (!r.has("schemaVersion")) throw ScenarioError("schemaVersion", "missing field");
  const int version = r.integer("schemaVersion", 0);
  if (version != kScenarioSchemaVersion) {
    throw ScenarioError("schemaVersion", "unsupported version " + std::to_string(version));
  }

  Scenario s;
  s.name = r.string("name", s.name);
  if (r.has("tags")) {
    const Reader tags = r.child("tags");
    for (std::size_t i = 0; i < tags.arraySize(); ++i) {
      const json& t = root.at("tags").at(i);
      if (!t.is_string()) throw ScenarioError(tags.at(i).path(), "expected a string");
      s.tags.push_back(t.get<std::string>());
    }
  }
  s.seed = static_cast<std::uint64_t>(r.number("seed", 0.0));
  s.initialPosition = r.vec3("initialPosition", s.initialPosition);
  s.target = r.child("target").vec3();

  if (r.has("controller")) {
    const Reader c = r.child("controller");
    ControllerConfig& cfg = s.controller;
    try {
      cfg.kind = parseControllerKind(c.string("type", "rice"));
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(c.path() + ".type", e.what());
    }
    cfg.alpha = c.number("alpha", cfg.alpha);
    cfg.wx = c.number("wx", cfg.wx);
    cfg.wf = c.number("wf", cfg.wf);
    cfg.noContactEps = c.number("noContactEps", cfg.noContactEps);
    cfg.desiredForce = c.number("desiredForce", cfg.desiredForce);
    cfg.virtualMass = c.number("virtualMass", cfg.virtualMass);
    cfg.virtualDamping = c.number("virtualDamping", cfg.virtualDamping);
  }
  if (r.has("rates")) {
    const Reader rates = r.child("rates");
    s.highRate = rates.number("high", s.highRate);
    s.lowRate = rates.number("low", s.lowRate);
  }
  s.maxDuration = r.number("maxDuration", s.maxDuration);
  s.targetTolerance = r.number("targetTolerance", s.targetTolerance);
  s.stallWindow = r.integer("stallWindow", s.stallWindow);
  s.stallEps = r.number("stallEps", s.stallEps);
  s.stopOnBreakage = r.boolean("stopOnBreakage", s.stopOnBreakage);
  if (r.has("sensor")) {
    const Reader g = r.child("sensor");
    s.sensor.n = g.integer("n", s.sensor.n);
    s.sensor.pitch = g.number("pitch", s.sensor.pitch);
    s.sensor.padOffsetY = g.number("padOffsetY", s.sensor.padOffsetY);
    s.sensor.padOffsetZ = g.number("padOffsetZ", s.sensor.padOffsetZ);
    s.sensor.padForward = g.number("padForward", s.sensor.padForward);
    s.sensor.contactRadius = g.number("contactRadius", s.sensor.contactRadius);
    s.sensor.contactStiffness = g.number("contactStiffness", s.sensor.contactStiffness);
  }
  if (r.has("relaxation")) {
    const Reader rx = r.child("relaxation");
    s.relaxIterations = rx.integer("iterations", s.relaxIterations);
    s.relaxStepGain = rx.number("stepGain", s.relaxStepGain);
  }
  if (r.has("mountingFrames")) {
    const Reader boxes = r.child("mountingFrames");
    for (std::size_t i = 0; i < boxes.arraySize(); ++i) {
      const Reader b = boxes.at(i);
      s.mountingFrames.push_back({b.child("min").vec3(), b.child("max").vec3()});
    }
  }
  if (r.has("canopy")) {
    const Reader c = r.child("canopy");
    for (std::size_t i = 0; i < c.arraySize(); ++i) s.canopy.push_back(parseBranch(c.at(i)));
  }
  if (r.has("arm")) s.arm = parseArm(r.child("arm"), s.initialPosition);

  try {
    validateScenario(s);
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    const auto colon = what.find(':');
    throw ScenarioError(colon == std::string::npos ? "" : what.substr(0, colon),
                        colon == std::string::npos ? what : what.substr(colon + 2));
  }
  return s;
}

std::string serializeScenario(const Scenario& s) {
  json j;
  j["schemaVersion"] = kScenarioSchemaVersion;
  j["name"] = s.name;
  j["tags"] = s.tags;
  j["seed"] = s.seed;
  j["initialPosition"] = toJson(s.initialPosition);
  j["target"] = toJson(s.target);
  const ControllerConfig& c = s.controller;
  j["controller"] = {{"type", toString(c.kind)},
                     {"alpha", c.alpha},
                     {"wx", c.wx},
                     {"wf", c.wf},
                     {"noContactEps", c.noContactEps},
                     {"desiredForce", c.desiredForce},
                     {"virtualMass", c.virtualMass},
                     {"virtualDamping", c.virtualDamping}};
  j["rates"] = {{"high", s.highRate}, {"low", s.lowRate}};
  j["maxDuration"] = s.maxDuration;
  j["targetTolerance"] = s.targetTolerance;
  j["stallWindow"] = s.stallWindow;
  j["stallEps"] = s.stallEps;
  j["stopOnBreakage"] = s.stopOnBreakage;
  j["sensor"] = {{"n", s.sensor.n},
                 {"pitch", s.sensor.pitch},
                 {"padOffsetY", s.sensor.padOffsetY},
                 {"padOffsetZ", s.sensor.padOffsetZ},
                 {"padForward", s.sensor.padForward},
                 {"contactRadius", s.sensor.contactRadius},
                 {"contactStiffness", s.sensor.contactStiffness}};
  j["relaxation"] = {{"iterations", s.relaxIterations}, {"stepGain", s.relaxStepGain}};
  json boxes = json::array();
  for (const auto& b : s.mountingFrames) boxes.push_back({{"min", toJson(b.min)}, {"max", toJson(b.max)}});
  j["mountingFrames"] = boxes;
  json canopy = json::array();
  for (const auto& b : s.canopy) canopy.push_back(branchToJson(b));
  j["canopy"] = canopy;
  if (s.arm) j["arm"] = armToJson(*s.arm);
  return j.dump(2);
}

Scenario loadScenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parseScenario(buf.str());
}

void saveScenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out = openForWrite(path);
  out << serializeScenario(s) << '\n';
}

void writeTrajectoryCsv(const TrialResult& r, const std::filesystem::path& path) {
  std::ofstream out = openForWrite(path);
  const std::size_t branches = r.perBranchMaxDeviation.size();
  out << "t,x,y,z,vx,vy,vz";
  for (std::size_t b = 0; b < branches; ++b) {
    out << ",b" << b << "_tip_x,b" << b << "_tip_y,b" << b << "_tip_z";
  }
  out << ",broken,stop_reason\n";
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
    const TrajectorySample& s = r.trajectory[i];
    out << s.t << ',' << s.x.x() << ',' << s.x.y() << ',' << s.x.z() << ',' << s.v.x() << ','
        << s.v.y() << ',' << s.v.z();
    for (const Vec3& tip : s.tips) out << ',' << tip.x() << ',' << tip.y() << ',' << tip.z();
    out << ',';
    for (auto f : s.broken) out << (f ? '1' : '0');
    out << ',';
    if (i + 1 == r.trajectory.size()) out << toString(r.stopReason);
    out << '\n';
  }
}

void writeTrialsCsv(std::span<const TrialRecord> trials, const std::filesystem::path& path) {
  std::ofstream out = openForWrite(path);
  out << "scenario,controller,seed,reached,stop_reason,broken_branches,total_disturbance,"
         "final_target_deviation,per_branch_max_deviation\n";
  for (const auto& t : trials) {
    out << csvQuote(t.scenario) << ',' << toString(t.controller) << ',' << t.seed << ','
        << (t.reached ? 1 : 0) << ',' << toString(t.stopReason) << ',' << t.brokenBranchCount
        << ',' << t.totalDisturbance << ',' << t.finalTargetDeviation << ',';
    for (std::size_t i = 0; i < t.perBranchMaxDeviation.size(); ++i) {
      if (i) out << ';';
      out << t.perBranchMaxDeviation[i];
    }
    out << '\n';
  }
}

std::vector<TrialRecord> readTrialsCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");

  std::vector<TrialRecord> out;
  int lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    const auto cells = splitCsvLine(line);
    const std::string where = path.string() + ":" + std::to_string(lineNo);
    if (cells.size() != 9) throw std::runtime_error(where + ": expected 9 columns");
    try {
      TrialRecord t;
      t.scenario = cells[0];
      t.controller = parseControllerKind(cells[1]);
      t.seed = std::stoull(cells[2]);
      t.reached = cells[3] == "1";
      t.stopReason = parseStopReason(cells[4]);
      t.brokenBranchCount = std::stoi(cells[5]);
      t.totalDisturbance = std::stod(cells[6]);
      t.finalTargetDeviation = std::stod(cells[7]);
      std::stringstream dev(cells[8]);
      std::string item;
      while (std::getline(dev, item, ';')) {
        if (!item.empty()) t.perBranchMaxDeviation.push_back(std::stod(item));
      }
      out.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  return out;
}

std::string summaryToJson(const SuiteSummary& s) {
  json j;
  j["trials"] = s.trials.size();
  j["medianDisturbance"] = s.medianDisturbance;
  j["medianTargetDeviation"] = s.medianTargetDeviation;
  j["noBreakReachRate"] = s.noBreakReachRate;
  int reached = 0, broken = 0;
  for (const auto& t : s.trials) {
    reached += t.reached ? 1 : 0;
    broken += t.brokenBranchCount;
  }
  j["reached"] = reached;
  j["brokenBranches"] = broken;
  return j.dump(2);
}

void writeSummaryJson(const SuiteSummary& s, const std::filesystem::path& path) {
  std::ofstream out = openForWrite(path);
  out << summaryToJson(s) << '\n';
}

}  // namespace canopy_reach
