/// Number of movement classes, rest included.
pub const NUM_CLASSES: usize = 53;

/// Movement names by class id. Commas inside names are written as `;` so the
/// names can be used unquoted in CSV files.
pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "Rest",
    "Index flexion",
    "Index extension",
    "Middle flexion",
    "Middle extension",
    "Ring flexion",
    "Ring extension",
    "Little finger flexion",
    "Little finger extension",
    "Thumb adduction",
    "Thumb abduction",
    "Thumb flexion",
    "Thumb extension",
    "Thumb up",
    "Extension of index and middle; flexion of the others",
    "Flexion of ring and little finger; extension of the others",
    "Thumb opposing base of little finger",
    "Abduction of all fingers",
    "Fingers flexed together in fist",
    "Pointing index",
    "Adduction of extended fingers",
    "Wrist supination (axis: middle finger)",
    "Wrist pronation (axis: middle finger)",
    "Wrist supination (axis: little finger)",
    "Wrist pronation (axis: little finger)",
    "Wrist flexion",
    "Wrist extension",
    "Wrist radial deviation",
    "Wrist ulnar deviation",
    "Wrist extension with closed hand",
    "Large diameter grasp",
    "Small diameter grasp (power grip)",
    "Fixed hook grasp",
    "Index finger extension grasp",
    "Medium wrap",
    "Ring grasp",
    "Prismatic four fingers grasp",
    "Stick grasp",
    "Writing tripod grasp",
    "Power sphere grasp",
    "Three finger sphere grasp",
    "Precision sphere grasp",
    "Tripod grasp",
    "Prismatic pinch grasp",
    "Tip pinch grasp",
    "Quadpod grasp",
    "Lateral grasp",
    "Parallel extension grasp",
    "Extension type grasp",
    "Power disk grasp",
    "Open a bottle with a tripod grasp",
    "Turn a screw (grasp the screwdriver with a stick grasp)",
    "Cut something (grasp the knife with an index finger extension grasp)",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    names: Vec<String>,
}

impl Default for LabelMap {
    fn default() -> Self {
        LabelMap {
            names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl LabelMap {
    /// Name of class `k`; ids past the table get a generic `class_<k>`.
    pub fn name(&self, k: usize) -> String {
        self.names
            .get(k)
            .cloned()
            .unwrap_or_else(|| format!("class_{k}"))
    }

    /// Names for the first `k` classes.
    pub fn names(&self, k: usize) -> Vec<String> {
        (0..k).map(|i| self.name(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}
