#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stableik/errors.hpp"
#include "stableik/kinematics.hpp"
#include "stableik/text_format.hpp"

namespace stableik {

namespace {

constexpr int kFormatVersion = 1;

[[noreturn]] void fail(const std::string& path, int line, const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& text, const std::string& path, int line) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    fail(path, line, "expected a number, got '" + text + "'");
  return value;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

Eigen::Vector3d parse_vec3(const std::string& text, const std::string& path,
                           int line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) fail(path, line, "expected x,y,z, got '" + text + "'");
  return Eigen::Vector3d(parse_double(parts[0], path, line),
                         parse_double(parts[1], path, line),
                         parse_double(parts[2], path, line));
}

}  // namespace

RobotModel load_robot_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);

  RobotModel model;
  std::map<std::string, int> joint_index;
  bool saw_version = false;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const auto tokens = split_ws(raw);
    if (tokens.empty()) continue;
    const std::string& kind = tokens[0];

    if (kind == "format_version") {
      if (tokens.size() != 2 || tokens[1] != std::to_string(kFormatVersion))
        fail(path, line_no, "unsupported format_version");
      saw_version = true;
    } else if (kind == "name") {
      if (tokens.size() < 2) fail(path, line_no, "name needs a value");
      model.name = tokens[1];
    } else if (kind == "gravity") {
      if (tokens.size() != 2) fail(path, line_no, "gravity needs one value");
      model.gravity = parse_double(tokens[1], path, line_no);
    } else if (kind == "joint") {
      if (tokens.size() < 2) fail(path, line_no, "joint needs a name");
      DhJoint joint;
      joint.name = tokens[1];
      bool actuated = true;
      for (std::size_t t = 2; t < tokens.size(); ++t) {
        const auto eq = tokens[t].find('=');
        if (eq == std::string::npos)
          fail(path, line_no, "expected key=value, got '" + tokens[t] + "'");
        const std::string key = tokens[t].substr(0, eq);
        const std::string val = tokens[t].substr(eq + 1);
        if (key == "parent") {
          if (val == "base") {
            joint.parent = -1;
          } else {
            auto it = joint_index.find(val);
            if (it == joint_index.end())
              fail(path, line_no, "parent joint '" + val + "' not declared yet");
            joint.parent = it->second;
          }
        } else if (key == "a") {
          joint.a = parse_double(val, path, line_no);
        } else if (key == "alpha") {
          joint.alpha = parse_double(val, path, line_no);
        } else if (key == "d") {
          joint.d = parse_double(val, path, line_no);
        } else if (key == "theta_offset") {
          joint.theta_offset = parse_double(val, path, line_no);
        } else if (key == "lower") {
          joint.lower = parse_double(val, path, line_no);
        } else if (key == "upper") {
          joint.upper = parse_double(val, path, line_no);
        } else if (key == "mass") {
          joint.mass = parse_double(val, path, line_no);
        } else if (key == "com") {
          joint.com_local = parse_vec3(val, path, line_no);
        } else if (key == "actuated") {
          actuated = val != "0";
        } else {
          fail(path, line_no, "unknown joint key '" + key + "'");
        }
      }
      if (joint_index.count(joint.name))
        fail(path, line_no, "duplicate joint name '" + joint.name + "'");
      joint_index[joint.name] = model.num_joints();
      model.joints.push_back(joint);
      model.actuated.push_back(actuated ? 1 : 0);
    } else if (kind == "end_effector") {
      if (tokens.size() != 3)
        fail(path, line_no, "end_effector needs: name joint");
      auto it = joint_index.find(tokens[2]);
      if (it == joint_index.end())
        fail(path, line_no, "end_effector joint '" + tokens[2] + "' unknown");
      model.end_effectors[tokens[1]] = it->second;
    } else if (kind == "foot_contact") {
      if (tokens.size() != 4 && tokens.size() != 5)
        fail(path, line_no, "foot_contact needs: foot x y [z]");
      Eigen::Vector3d p(parse_double(tokens[2], path, line_no),
                        parse_double(tokens[3], path, line_no),
                        tokens.size() == 5 ? parse_double(tokens[4], path, line_no)
                                           : 0.0);
      model.foot_contacts[tokens[1]].push_back(p);
    } else {
      fail(path, line_no, "unknown record '" + kind + "'");
    }
  }
  if (!saw_version) throw ParseError(path + ": missing format_version");
  model.validate();
  return model;
}

void save_robot_model(const std::string& path, const RobotModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file: " + path);
  out << "format_version " << kFormatVersion << "\n";
  if (!model.name.empty()) out << "name " << model.name << "\n";
  out << "gravity " << format_double(model.gravity) << "\n\n";
  for (int i = 0; i < model.num_joints(); ++i) {
    const DhJoint& j = model.joints[i];
    out << "joint " << j.name << " parent="
        << (j.parent < 0 ? std::string("base") : model.joints[j.parent].name)
        << " a=" << format_double(j.a) << " alpha=" << format_double(j.alpha)
        << " d=" << format_double(j.d)
        << " theta_offset=" << format_double(j.theta_offset)
        << " lower=" << format_double(j.lower)
        << " upper=" << format_double(j.upper)
        << " mass=" << format_double(j.mass) << " com=" << format_double(j.com_local.x())
        << "," << format_double(j.com_local.y()) << ","
        << format_double(j.com_local.z()) << " actuated=" << (model.actuated[i] ? 1 : 0)
        << "\n";
  }
  out << "\n";
  for (const auto& [ee_name, idx] : model.end_effectors)
    out << "end_effector " << ee_name << " " << model.joints[idx].name << "\n";
  for (const auto& [foot, pts] : model.foot_contacts)
    for (const auto& p : pts)
      out << "foot_contact " << foot << " " << format_double(p.x()) << " "
          << format_double(p.y()) << " " << format_double(p.z()) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace stableik
