use std::path::Path;

use super::instance::InstanceSpec;
use crate::error::Result;

const BUILTINS: [(&str, &str); 3] = [
    ("quad1d", include_str!("../../instances/quad1d.toml")),
    ("two-point", include_str!("../../instances/two-point.toml")),
    ("newsvendor500", include_str!("../../instances/newsvendor500.toml")),
];

/// Names accepted by [`builtin_instance`].
pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(name, _)| *name)
}

/// Instance shipped with the crate, by name.
pub fn builtin_instance(name: &str) -> Option<Result<InstanceSpec>> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| InstanceSpec::from_toml_str(text, Path::new(&format!("<builtin {n}>"))))
}
