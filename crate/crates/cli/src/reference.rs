//! Published screening results on the recruitment data, shown next to
//! harness output when that CSV is supplied.

/// `(method, q, fdp, power, time_s)` means.
pub const RECRUITMENT: [(&str, f64, f64, f64, f64); 9] = [
    ("cfbh", 0.1, 0.0928, 0.6319, 0.0037),
    ("ro-cfbh", 0.1, 0.0038, 0.3041, 0.2976),
    ("loo-cfbh", 0.1, 0.0657, 0.6744, 0.0060),
    ("cfbh", 0.2, 0.2000, 0.9277, 0.0037),
    ("ro-cfbh", 0.2, 0.0602, 0.6522, 0.2971),
    ("loo-cfbh", 0.2, 0.1836, 0.9430, 0.0060),
    ("cfbh", 0.3, 0.2882, 0.9923, 0.0037),
    ("ro-cfbh", 0.3, 0.2483, 0.9627, 0.2970),
    ("loo-cfbh", 0.3, 0.2837, 0.9917, 0.0060),
];

pub fn recruitment(method: &str, q: f64) -> Option<(f64, f64, f64)> {
    RECRUITMENT.iter().find(|r| r.0 == method && (r.1 - q).abs() < 1e-9).map(|r| (r.2, r.3, r.4))
}
