//! Reference table of depolarization, absorption and emission factors for a
//! ladder of ellipsoid shapes, in air and in water.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{coupling_factors, Ellipsoid, OpticalEnvironment};

/// One shape section: δ per axis and, per medium, the three directional
/// factors followed by their arithmetic mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Section {
    pub shape_id: String,
    pub axes: [f64; 3],
    pub deltas: [f64; 3],
    pub abs_air: [f64; 4],
    pub abs_water: [f64; 4],
    pub em_air: [f64; 4],
    pub em_water: [f64; 4],
}

/// The eight tabulated shapes, longest axis `a = 1`.
pub const TABLE1_SHAPES: [(&str, [f64; 3]); 8] = [
    ("b,c=0", [1.0, 0.0, 0.0]),
    ("b,c=1/4", [1.0, 0.25, 0.25]),
    ("b,c=1/2", [1.0, 0.5, 0.5]),
    ("b,c=1", [1.0, 1.0, 1.0]),
    ("c=1/2", [1.0, 1.0, 0.5]),
    ("c=1/4", [1.0, 1.0, 0.25]),
    ("c=1/8", [1.0, 1.0, 0.125]),
    ("c=0", [1.0, 1.0, 0.0]),
];

fn with_avg(v: [f64; 3]) -> [f64; 4] {
    [v[0], v[1], v[2], (v[0] + v[1] + v[2]) / 3.0]
}

pub fn table1_report() -> Vec<Table1Section> {
    let air = OpticalEnvironment::air();
    let water = OpticalEnvironment::water();
    TABLE1_SHAPES
        .iter()
        .map(|(id, axes)| {
            let shape = Ellipsoid {
                a: axes[0],
                b: axes[1],
                c: axes[2],
            };
            let fa = coupling_factors(&shape, &air).expect("tabulated shapes are valid");
            let fw = coupling_factors(&shape, &water).expect("tabulated shapes are valid");
            Table1Section {
                shape_id: (*id).to_string(),
                axes: *axes,
                deltas: fa.deltas.as_array(),
                abs_air: with_avg(fa.absorption),
                abs_water: with_avg(fw.absorption),
                em_air: with_avg(fa.emission),
                em_water: with_avg(fw.emission),
            }
        })
        .collect()
}

pub const CSV_HEADER: &str = "shape_id,axis_ratios,delta_a,delta_b,delta_c,\
abs_air_a,abs_air_b,abs_air_c,abs_air_avg,\
abs_water_a,abs_water_b,abs_water_c,abs_water_avg,\
em_air_a,em_air_b,em_air_c,em_air_avg,\
em_water_a,em_water_b,em_water_c,em_water_avg";

/// CSV with full `f64` precision; the axis ratios are a `a:b:c` string.
pub fn to_csv(sections: &[Table1Section]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in sections {
        let mut fields = vec![
            s.shape_id.clone(),
            format!("{}:{}:{}", s.axes[0], s.axes[1], s.axes[2]),
        ];
        fields.extend(s.deltas.iter().map(f64::to_string));
        for group in [&s.abs_air, &s.abs_water, &s.em_air, &s.em_water] {
            fields.extend(group.iter().map(f64::to_string));
        }
        // Shape ids contain commas.
        fields[0] = format!("\"{}\"", fields[0]);
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Aligned plain-text rendering, one block per shape.
pub fn to_text(sections: &[Table1Section]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<14} {:>9} {:>9} {:>9} {:>9}",
        "shape", "quantity", "E||a", "E||b", "E||c", "av."
    );
    for s in sections {
        let _ = writeln!(out, "{}", "-".repeat(66));
        let rows: [(&str, [f64; 4], bool); 5] = [
            ("delta", [s.deltas[0], s.deltas[1], s.deltas[2], f64::NAN], false),
            ("eta^2 n air", s.abs_air, true),
            ("eta^2 n water", s.abs_water, true),
            ("eta^2/n air", s.em_air, true),
            ("eta^2/n water", s.em_water, true),
        ];
        for (i, (label, v, has_avg)) in rows.iter().enumerate() {
            let name = if i == 0 { s.shape_id.as_str() } else { "" };
            let avg = if *has_avg {
                format!("{:>9.4}", v[3])
            } else {
                format!("{:>9}", "--")
            };
            let _ = writeln!(
                out,
                "{:<10} {:<14} {:>9.4} {:>9.4} {:>9.4} {}",
                name, label, v[0], v[1], v[2], avg
            );
        }
    }
    out
}
