use super::*;

const CONTROL: &str = "FoamFile { version 2.0; format ascii; class dictionary; object controlDict; }\nstartTime 0;\n";

#[test]
fn minimal_control_dict() {
    let t = parse(CONTROL, Some("controlDict")).unwrap();
    let h = t.header.as_ref().unwrap();
    assert_eq!(h.object, "controlDict");
    assert_eq!(h.version.as_deref(), Some("2.0"));
    assert_eq!(t.body.entries, vec![Entry::Value { key: "startTime".into(), items: vec![Item::Number("0".into())] }]);
}

#[test]
fn expected_name_must_match_header_object() {
    let err = parse(CONTROL, Some("fvSchemes")).unwrap_err();
    assert!(err.expected.contains("fvSchemes"), "{err}");
}

#[test]
fn nested_boundary_field_is_two_levels_deep() {
    let t = parse("boundaryField { inlet { type fixedValue; value uniform (1 0 0); } }", None).unwrap();
    let inlet = t.body.get_dict("boundaryField").unwrap().get_dict("inlet").unwrap();
    assert_eq!(inlet.get_word("type"), Some("fixedValue"));
    assert_eq!(
        inlet.get_items("value").unwrap(),
        &[
            Item::Word("uniform".into()),
            Item::List(vec![Item::Number("1".into()), Item::Number("0".into()), Item::Number("0".into())])
        ]
    );
}

#[test]
fn unbalanced_brace_reports_opening_line() {
    let src = "a 1;\nouter\n{\n    b 2;\n";
    let err = parse(src, None).unwrap_err();
    assert_eq!((err.line, err.column), (3, 1));
    assert_eq!(err.found, "end of input");
}

#[test]
fn stray_closing_brace_reports_its_position() {
    let err = parse("a 1;\n  }\n", None).unwrap_err();
    assert_eq!((err.line, err.column), (2, 3));
}

#[test]
fn missing_semicolon_is_an_error() {
    let err = parse("d { a 1 }", None).unwrap_err();
    assert_eq!(err.expected, "';'");
    assert_eq!((err.line, err.column), (1, 9));
}

#[test]
fn dimensioned_scalar_round_trips() {
    let src = "nu [0 2 -1 0 0 0 0] 1e-05;";
    let t = parse(src, None).unwrap();
    let items = t.body.get_items("nu").unwrap();
    assert!(matches!(&items[0], Item::Dimensions(d) if d.len() == 7));
    assert_eq!(items[1], Item::Number("1e-05".into()));
    let text = serialize(&t);
    assert!(text.contains("1e-05"), "{text}");
    assert_eq!(parse(&text, None).unwrap(), t);
}

#[test]
fn empty_tree_serializes_to_header_only() {
    let t = DictionaryTree { header: Some(FoamHeader::new("dictionary", Some("system"), "controlDict")), body: Dictionary::default() };
    let text = serialize(&t);
    assert!(text.starts_with("FoamFile\n{\n"));
    assert!(text.trim_end().ends_with('}'));
    assert_eq!(parse(&text, Some("controlDict")).unwrap(), t);
}

#[test]
fn directives_are_opaque() {
    let src = "#include \"initialConditions\" // trailing\nboundaryField\n{\n    #includeEtc \"caseDicts/setConstraintTypes\"\n}\n";
    let t = parse(src, None).unwrap();
    assert_eq!(t.body.entries[0], Entry::Directive { name: "#include".into(), args: "\"initialConditions\"".into() });
    let bf = t.body.get_dict("boundaryField").unwrap();
    assert_eq!(bf.entries[0], Entry::Directive { name: "#includeEtc".into(), args: "\"caseDicts/setConstraintTypes\"".into() });
    assert_eq!(parse(&serialize(&t), None).unwrap(), t);
}

#[test]
fn counted_polymesh_list_is_a_bare_entry() {
    let src = "FoamFile { format ascii; class polyBoundaryMesh; object boundary; }\n2\n(\n inlet { type patch; }\n outlet { type patch; }\n)\n";
    let t = parse(src, None).unwrap();
    assert!(t.header.as_ref().unwrap().version.is_none());
    match &t.body.entries[..] {
        [Entry::Bare(items)] => {
            assert_eq!(items[0], Item::Number("2".into()));
            assert!(matches!(&items[1], Item::List(l) if l.len() == 4));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(parse(&serialize(&t), None).unwrap(), t);
}

#[test]
fn last_definition_wins() {
    let t = parse("a 1; a 2;", None).unwrap();
    assert_eq!(t.body.get_word("a"), Some("2"));
}

#[test]
fn set_value_replaces_in_place() {
    let mut t = parse("numberOfSubdomains 4;\nmethod scotch;\n", None).unwrap();
    t.body.set_value("numberOfSubdomains", vec![Item::Number("32".into())]);
    assert_eq!(t.body.entries.len(), 2);
    assert_eq!(t.body.get_word("numberOfSubdomains"), Some("32"));
}
