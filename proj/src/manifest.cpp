#include "elastofuse/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "elastofuse/errors.hpp"

namespace fs = std::filesystem;

namespace elastofuse::dataio {

void DatasetManifest::add(const PatientRecord& patient, const ImageRecord& image) {
  if (image.image_id.empty()) throw DataError("image row without image_id");
  if (image_index_.count(image.image_id))
    throw DataError("duplicate image_id: " + image.image_id);
  auto it = patient_index_.find(patient.patient_id);
  if (it == patient_index_.end()) {
    patient_index_[patient.patient_id] = patients_.size();
    patients_.push_back(patient);
  } else {
    const PatientRecord& seen = patients_[it->second];
    if (seen.label != patient.label)
      throw DataError("conflicting labels for patient_id: " + patient.patient_id);
    if (seen.histological_type != patient.histological_type ||
        seen.strain_ratio != patient.strain_ratio)
      throw DataError("conflicting metadata for patient_id: " + patient.patient_id);
  }
  image_index_[image.image_id] = images_.size();
  images_.push_back(image);
}

const PatientRecord& DatasetManifest::patient(const std::string& patient_id) const {
  auto it = patient_index_.find(patient_id);
  if (it == patient_index_.end()) throw DataError("unknown patient_id: " + patient_id);
  return patients_[it->second];
}

bool DatasetManifest::has_patient(const std::string& patient_id) const {
  return patient_index_.count(patient_id) > 0;
}

std::vector<const ImageRecord*> DatasetManifest::images_of(const std::string& patient_id) const {
  std::vector<const ImageRecord*> out;
  for (const auto& rec : images_)
    if (rec.patient_id == patient_id) out.push_back(&rec);
  return out;
}

std::size_t DatasetManifest::count_label(Label l) const {
  std::size_t n = 0;
  for (const auto& p : patients_)
    if (p.label == l) ++n;
  return n;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool field_empty(const std::string& s) { return s.empty() || s == "-"; }

Rect parse_roi(const std::string& s, int line_no) {
  Rect r;
  char c1, c2, c3;
  std::istringstream is(s);
  if (!(is >> r.x >> c1 >> r.y >> c2 >> r.w >> c3 >> r.h) || c1 != ',' || c2 != ',' ||
      c3 != ',')
    throw DataError("malformed roi '" + s + "' at line " + std::to_string(line_no));
  return r;
}

const char* kHeader =
    "patient_id\tlabel\timage_id\tbmode_path\telasto_path\troi\thistological_type\tstrain_ratio";

}  // namespace

DatasetManifest parse_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing manifest file: " + path);
  const fs::path base = fs::path(path).parent_path();

  DatasetManifest manifest;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (split_tabs(line).at(0) != "patient_id")
        throw DataError("manifest header row missing (expected patient_id...)");
      saw_header = true;
      continue;
    }
    auto f = split_tabs(line);
    if (f.size() < 5)
      throw DataError("manifest row needs at least 5 columns at line " + std::to_string(line_no));
    f.resize(8);

    PatientRecord patient;
    patient.patient_id = f[0];
    if (patient.patient_id.empty())
      throw DataError("missing patient_id at line " + std::to_string(line_no));
    if (field_empty(f[1]))
      throw DataError("missing label for patient " + patient.patient_id + " at line " +
                      std::to_string(line_no));
    if (f[1] == "B")
      patient.label = Label::Benign;
    else if (f[1] == "M")
      patient.label = Label::Malignant;
    else
      throw DataError("label must be B or M, got '" + f[1] + "' at line " +
                      std::to_string(line_no));
    if (!field_empty(f[6])) patient.histological_type = f[6];
    if (!field_empty(f[7])) {
      std::size_t used = 0;
      double sr = std::stod(f[7], &used);
      if (used != f[7].size() || sr < 0.0)
        throw DataError("strain_ratio must be a nonnegative number at line " +
                        std::to_string(line_no));
      patient.strain_ratio = sr;
    }

    ImageRecord image;
    image.image_id = f[2];
    image.patient_id = patient.patient_id;
    auto resolve = [&](const std::string& p) {
      fs::path fp(p);
      return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    image.bmode_path = resolve(f[3]);
    image.elasto_path = resolve(f[4]);
    if (field_empty(f[3]) || !fs::exists(image.bmode_path))
      throw DataError("unresolvable bmode_path '" + f[3] + "' at line " +
                      std::to_string(line_no));
    if (field_empty(f[4]) || !fs::exists(image.elasto_path))
      throw DataError("unresolvable elasto_path '" + f[4] + "' at line " +
                      std::to_string(line_no));
    if (!field_empty(f[5])) image.roi = parse_roi(f[5], line_no);

    manifest.add(patient, image);
  }
  if (manifest.image_count() == 0) throw DataError("empty manifest: " + path);
  return manifest;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << kHeader << "\n";
  for (const auto& img : manifest.images()) {
    const PatientRecord& p = manifest.patient(img.patient_id);
    out << p.patient_id << '\t' << label_code(p.label) << '\t' << img.image_id << '\t'
        << img.bmode_path << '\t' << img.elasto_path << '\t';
    if (img.roi)
      out << img.roi->x << ',' << img.roi->y << ',' << img.roi->w << ',' << img.roi->h;
    out << '\t' << (p.histological_type ? *p.histological_type : "") << '\t';
    if (p.strain_ratio) out << *p.strain_ratio;
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace elastofuse::dataio
