//! The network-service design and onboarding workspace shipped with the
//! binary (`maple init --fixture nfv`).

use std::path::Path;

macro_rules! files {
    ($($path:literal),* $(,)?) => {
        &[$(($path, include_str!(concat!("../../fixtures/nfv/", $path)))),*]
    };
}

/// Workspace-relative path and contents of every fixture file.
pub const NFV_FILES: &[(&str, &str)] = files![
    "flows/NSDesign.pm.json",
    "flows/NSOnboarding.pm.json",
    "flows/main.pm.json",
    "launch.json",
    "mm/catalog.mm.json",
    "mm/nfontology.mm.json",
    "mm/notification.mm.json",
    "mm/nsd.mm.json",
    "mm/nsdinfo.mm.json",
    "mm/nsreq.mm.json",
    "mm/solutionmap.mm.json",
    "models/nsreq1.model",
    "models/nsreq1.model.conforms",
    "transformations/create_nsdinfo.process",
    "transformations/decompose.builtin.json",
    "transformations/design_forwarding_graph.builtin.json",
    "transformations/enrich_ontology.builtin.json",
    "transformations/refine_nsd.builtin.json",
    "transformations/select_vnfs.builtin.json",
    "transformations/upload_nsd.process",
    "transformations/validate_and_catalog.process",
];

/// Top process model of the fixture.
pub const NFV_MAIN: &str = "flows/main.pm.json";
pub const NFV_LAUNCH: &str = "launch.json";

/// Writes the fixture into `dir`, replacing files of the same name.
pub fn write_nfv(dir: &Path) -> std::io::Result<()> {
    for (rel, text) in NFV_FILES {
        crate::util::write_file(&dir.join(rel), text.as_bytes())?;
    }
    Ok(())
}
