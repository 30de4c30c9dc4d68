use std::ffi::CString;

use pyo3::prelude::*;

use confcause::confcause;

fn run(script: &str) -> PyResult<()> {
    pyo3::append_to_inittab!(confcause);
    Python::initialize();
    Python::attach(|py| py.run(&CString::new(script).unwrap(), None, None))
}

#[test]
fn module_runs_a_diagnosis() {
    run(r#"
import math
import confcause

stat, p = confcause.fisher_z(0.25, 80, 1)
z = 0.5 * math.log(1.25 / 0.75) * math.sqrt(80 - 1 - 3)
assert abs(stat - z) < 1e-10
assert abs(p - math.erfc(z / math.sqrt(2))) < 1e-9

data, scm, truth = confcause.generate(seed=3, samples=1200, options=4, metrics=3)
assert data.n_rows == 1200 and len(data.names) == 9
model = confcause.learn(data)
for u, v in model.directed():
    assert not v.startswith("o")
d = confcause.diagnose(data, model, "y0", top_k=1)
assert d is None or len(d["paths"]) == 1

try:
    confcause.Dataset("a\n1\n", "{}")
except ValueError:
    pass
else:
    raise AssertionError("missing role accepted")
"#)
    .unwrap();
}
