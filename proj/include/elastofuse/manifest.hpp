#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "elastofuse/image.hpp"

namespace elastofuse::dataio {

enum class Label { Benign = 0, Malignant = 1 };

inline const char* label_code(Label l) { return l == Label::Benign ? "B" : "M"; }
inline int label_index(Label l) { return static_cast<int>(l); }

struct PatientRecord {
  std::string patient_id;
  Label label = Label::Benign;
  std::optional<std::string> histological_type;
  std::optional<double> strain_ratio;
};

struct ImageRecord {
  std::string image_id;
  std::string patient_id;
  std::string bmode_path;
  std::string elasto_path;
  std::optional<Rect> roi;
};

/// Patient-keyed index of paired B-mode/elastography images. Parsed from a
/// line-delimited tab-separated file; one image pair per row, patient
/// metadata inlined per row.
class DatasetManifest {
 public:
  void add(const PatientRecord& patient, const ImageRecord& image);

  const std::vector<ImageRecord>& images() const { return images_; }
  const std::vector<PatientRecord>& patients() const { return patients_; }
  const PatientRecord& patient(const std::string& patient_id) const;
  bool has_patient(const std::string& patient_id) const;
  std::vector<const ImageRecord*> images_of(const std::string& patient_id) const;

  std::size_t patient_count() const { return patients_.size(); }
  std::size_t image_count() const { return images_.size(); }
  std::size_t count_label(Label l) const;

 private:
  std::vector<ImageRecord> images_;
  std::vector<PatientRecord> patients_;
  std::map<std::string, std::size_t> patient_index_;
  std::map<std::string, std::size_t> image_index_;
};

/// Parses a manifest file. Columns (tab-separated, header row required):
///   patient_id  label  image_id  bmode_path  elasto_path  roi  histological_type  strain_ratio
/// label is B or M; roi is "x,y,w,h" or empty; trailing optional columns may
/// be empty or "-". Relative image paths resolve against the manifest's
/// directory. Throws DataError with a named reason: missing file, empty
/// manifest, duplicate image_id, conflicting patient metadata, missing label,
/// unresolvable image path.
DatasetManifest parse_manifest(const std::string& path);

/// Writes the manifest in the same schema. Paths are written as stored.
void write_manifest(const std::string& path, const DatasetManifest& manifest);

}  // namespace elastofuse::dataio
