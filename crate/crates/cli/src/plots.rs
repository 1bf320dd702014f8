//! Standalone matplotlib scripts for a result CSV.

pub const TRAJECTORY_SCRIPT: &str = "plot_trajectory.py";
pub const ERRORS_SCRIPT: &str = "plot_errors.py";

pub fn trajectory_script(csv_name: &str, pi2: f64) -> String {
    format!(
        r#"import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("{csv_name}")))
col = lambda k: [float(r[k]) for r in rows]
pi2 = {pi2:.17e}

fig, ax = plt.subplots(figsize=(6, 6))
ax.plot(col("x"), col("y"), label="truth")
ax.plot(col("x_hat"), col("y_hat"), "--", label="estimate")
ax.plot([-pi2], [0.0], "o", label="Earth")
ax.plot([1.0 - pi2], [0.0], "o", label="Moon")
ax.set_xlabel("x (normalized)")
ax.set_ylabel("y (normalized)")
ax.set_aspect("equal")
ax.legend()
fig.savefig("trajectory.png", dpi=150)
"#
    )
}

pub fn errors_script(csv_name: &str) -> String {
    format!(
        r#"import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("{csv_name}")))
col = lambda k: [float(r[k]) for r in rows]

fig, ax = plt.subplots(figsize=(8, 4))
ax.semilogy(col("t"), [max(v, 1e-18) for v in col("z_err_norm")])
ax.set_xlabel("t (normalized)")
ax.set_ylabel("position error norm")
fig.savefig("errors.png", dpi=150)
"#
    )
}
