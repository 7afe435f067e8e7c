//! Error extraction against hand-traced expectations for each fixture log.

use std::collections::BTreeMap;
use std::path::Path;

use foamforge_core::case::{ErrorRecord, Severity};
use foamforge_core::exec::{extract_errors, ExecStatus, ExecutionResult};

fn fixture(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/logs").join(name)).unwrap()
}

fn result(logs: &[(&str, &str)], codes: &[(&str, i32)]) -> ExecutionResult {
    ExecutionResult::from_parts(
        logs.iter().map(|(k, f)| (k.to_string(), fixture(f))).collect(),
        codes.iter().map(|(k, c)| (k.to_string(), *c)).collect(),
    )
}

fn fatal(location: &str, message: &str) -> ErrorRecord {
    ErrorRecord { message: message.into(), location: location.into(), severity: Severity::Fatal }
}

fn warning(location: &str, message: &str) -> ErrorRecord {
    ErrorRecord { message: message.into(), location: location.into(), severity: Severity::Warning }
}

#[test]
fn fatal_error_block() {
    let r = result(&[("log.icoFoam", "fatal.log.icoFoam")], &[("icoFoam", 1)]);
    assert_eq!(r.status, ExecStatus::Failure);
    assert_eq!(
        extract_errors(&r),
        vec![fatal(
            "log.icoFoam",
            "Cannot find patchField entry for movingWall\n\
             From function void Foam::GeometricField<Type, PatchField, GeoMesh>::Boundary::readField(const Foam::DimensionedField<Type, GeoMesh>&, const Foam::dictionary&)\n\
             in file GeometricBoundaryField.C at line 172."
        )]
    );
}

#[test]
fn fatal_io_error_with_file_and_line() {
    let r = result(&[("log.simpleFoam", "fatal_io.log.simpleFoam")], &[("simpleFoam", 1)]);
    let errs = extract_errors(&r);
    assert_eq!(
        errs,
        vec![fatal(
            "log.simpleFoam: /work/pitzDaily/system/fvSchemes/divSchemes line 25",
            "keyword div(phi,U) is undefined in dictionary \"/work/pitzDaily/system/fvSchemes/divSchemes\"\n\
             file: /work/pitzDaily/system/fvSchemes/divSchemes from line 25 to line 30.\n\
             From function const Foam::entry& Foam::dictionary::lookupEntry(const Foam::word&, bool, bool) const\n\
             in file db/dictionary/dictionary.C at line 797."
        )]
    );
    assert!(errs[0].location.contains("fvSchemes"));
}

#[test]
fn warning_only_log_is_success() {
    let r = result(&[("log.blockMesh", "warning.log.blockMesh")], &[("blockMesh", 0)]);
    assert_eq!(r.status, ExecStatus::Success);
    assert_eq!(
        extract_errors(&r),
        vec![warning(
            "log.blockMesh",
            "From function Foam::polyMesh::polyMesh(...)\n\
             in file meshes/polyMesh/polyMeshFromShapeMesh.C at line 632\n\
             Found 1 undefined faces in mesh; adding to default patch."
        )]
    );
}

#[test]
fn clean_log_has_no_records() {
    let r = result(&[("log.icoFoam", "clean.log.icoFoam")], &[("icoFoam", 0)]);
    assert_eq!(r.status, ExecStatus::Success);
    assert_eq!(extract_errors(&r), vec![]);
}

#[test]
fn nonzero_exit_without_marker_carries_fifty_line_tail() {
    let r = result(&[("log.setFields", "no_marker.log.setFields")], &[("setFields", 1)]);
    assert_eq!(r.status, ExecStatus::Failure);
    let mut expected = String::from("setFields exited with code 1\n");
    for i in 9..=57 {
        expected.push_str(&format!("Setting field region values {i}\n"));
    }
    expected.push_str("Segmentation fault (core dumped)");
    let errs = extract_errors(&r);
    assert_eq!(errs, vec![fatal("log.setFields", &expected)]);
    assert_eq!(errs[0].message.lines().count(), 1 + 50);
}

#[test]
fn multi_command_run() {
    let r = result(
        &[
            ("log.blockMesh", "multi.log.blockMesh"),
            ("log.checkMesh", "multi.log.checkMesh"),
            ("log.pisoFoam", "multi.log.pisoFoam"),
        ],
        &[("blockMesh", 0), ("checkMesh", 0), ("pisoFoam", 1)],
    );
    assert_eq!(
        extract_errors(&r),
        vec![
            warning(
                "log.pisoFoam",
                "Reading \"/work/case/constant/momentumTransport\" at line 18\nUnknown keyword RAS.printCoeffs ignored"
            ),
            fatal(
                "log.pisoFoam: /work/case/system/fvSchemes.gradSchemes.default line 21",
                "(openfoam-2312)\n\
                 Unknown discretisation scheme Gaus\n\
                 Valid schemes are :\n\
                 3(Gauss CoEuler localEuler)\n\
                 file: /work/case/system/fvSchemes.gradSchemes.default at line 21.\n\
                 From static Foam::tmp<Foam::fv::gradScheme<Type>> Foam::fv::gradScheme<Type>::New(...)\n\
                 in file lnInclude/gradScheme.C at line 54."
            ),
        ]
    );
}

#[test]
fn allrun_exit_is_explained_by_any_fatal_block() {
    let r = result(&[("log.icoFoam", "fatal.log.icoFoam")], &[("Allrun", 1)]);
    let errs = extract_errors(&r);
    assert_eq!(errs.len(), 1);
    assert_eq!(errs[0].location, "log.icoFoam");

    let r = ExecutionResult::from_parts(
        BTreeMap::from([("stdout".to_string(), "a\nb\n".to_string())]),
        BTreeMap::from([("Allrun".to_string(), 2)]),
    );
    assert_eq!(extract_errors(&r), vec![fatal("stdout", "Allrun exited with code 2\na\nb")]);
}

#[test]
fn every_location_names_a_log_key() {
    let r = result(
        &[
            ("log.blockMesh", "warning.log.blockMesh"),
            ("log.pisoFoam", "multi.log.pisoFoam"),
            ("log.setFields", "no_marker.log.setFields"),
        ],
        &[("blockMesh", 0), ("pisoFoam", 1), ("setFields", 139)],
    );
    let errs = extract_errors(&r);
    assert_eq!(errs.len(), 4);
    for e in &errs {
        let key = e.location.split(':').next().unwrap();
        assert!(r.logs.contains_key(key), "{}", e.location);
    }
}

#[test]
fn fatal_records_empty_iff_success() {
    for (log, file, code) in [
        ("log.icoFoam", "fatal.log.icoFoam", 1),
        ("log.icoFoam", "fatal.log.icoFoam", 0),
        ("log.icoFoam", "clean.log.icoFoam", 0),
        ("log.icoFoam", "clean.log.icoFoam", 1),
        ("log.blockMesh", "warning.log.blockMesh", 0),
    ] {
        let r = result(&[(log, file)], &[(log.trim_start_matches("log."), code)]);
        let no_fatal = extract_errors(&r).iter().all(|e| e.severity != Severity::Fatal);
        assert_eq!(no_fatal, r.is_success(), "{file} exit {code}");
    }
}
