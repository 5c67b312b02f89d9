//! Flag vectors computed with Python's hashlib, independently of this
//! crate.

use serde_json::Value;
use thunder_core::generate_flag;

pub struct Vector {
    pub seed: String,
    pub project_id: String,
    pub flag: String,
}

pub fn vectors() -> Vec<Vector> {
    let all: Vec<Value> = serde_json::from_str(include_str!("../data/flag_vectors.json")).expect("vector file");
    all.iter()
        .map(|v| Vector {
            seed: v["seed"].as_str().unwrap_or_default().to_string(),
            project_id: v["project_id"].as_str().unwrap_or_default().to_string(),
            flag: v["flag"].as_str().unwrap_or_default().to_string(),
        })
        .collect()
}

/// Every vector matches, and changing the project changes the flag.
pub fn check_flag_vectors() -> Result<usize, String> {
    let vs = vectors();
    if vs.len() != 100 {
        return Err(format!("{} vectors, want 100", vs.len()));
    }
    for (i, v) in vs.iter().enumerate() {
        let got = generate_flag(&v.seed, &v.project_id);
        if got != v.flag {
            return Err(format!("{} / {}: {got} != {}", v.seed, v.project_id, v.flag));
        }
        let other = &vs[(i + 1) % vs.len()].project_id;
        if other == &v.project_id || generate_flag(&v.seed, other) == got {
            return Err(format!("{} / {}: not distinct from {other}", v.seed, v.project_id));
        }
    }
    Ok(vs.len())
}
