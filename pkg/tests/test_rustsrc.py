import pytest

from rustport import rustsrc
from rustport.errors import ParseViolation

LAZY_STATIC = (
    "use once_cell::sync::Lazy;\n"
    "static special_number: Lazy<i64> = Lazy::new(|| setup_special_number());\n"
)

STRUCT = """#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EntryDetail {
    #[serde(rename = "Addenda05")]
    pub addenda05: Option<Vec<i64>>,
    #[serde(rename = "TraceId")]
    pub trace_id: String,
}
"""

IMPL = """impl Batch {
    pub fn entry_count(&self) -> i64 {
        match &self.entries {
            Some(v) => v.len() as i64,
            None => 0,
        }
    }
}
"""

TRAIT = """pub trait Batcher: Batcher_SetHeader + canValidate_Validate + canValidate {}
pub trait Batcher_SetHeader {
    fn set_header(&mut self, h: &BatchHeader);
}
impl<T> Batcher for T where T: Batcher_SetHeader + canValidate_Validate {}
"""


def test_static_item():
    items = rustsrc.parse_items(LAZY_STATIC)
    assert [i.kind for i in items] == ["use", "static"]
    st = items[1]
    assert st.name == "special_number"
    assert st.type_text == "Lazy<i64>"
    assert st.init_text.startswith("Lazy::new(")


def test_struct_item_fields_and_derives():
    (item,) = rustsrc.parse_items(STRUCT)
    assert item.kind == "struct" and item.name == "EntryDetail"
    assert item.vis == "pub"
    assert [f[0] for f in item.fields] == ["addenda05", "trace_id"]
    assert item.fields[0][1] == "Option<Vec<i64>>"
    assert "Debug" in item.derives


def test_inherent_impl():
    (item,) = rustsrc.parse_items(IMPL)
    assert item.kind == "impl" and item.trait_path == "" and item.impl_type == "Batch"
    assert len(item.fns) == 1
    fn = item.fns[0]
    assert fn.name == "entry_count"
    assert fn.self_param == "&self"
    assert fn.ret == "i64"
    assert fn.body.startswith("{") and fn.body.endswith("}")


def test_trait_items_and_bounds():
    items = rustsrc.parse_items(TRAIT)
    assert [i.kind for i in items] == ["trait", "trait", "impl"]
    main = items[0]
    assert main.bounds == ["Batcher_SetHeader", "canValidate_Validate", "canValidate"]
    sub = items[1]
    assert sub.trait_methods[0].name == "set_header"
    assert sub.trait_methods[0].self_param == "&mut self"
    blanket = items[2]
    assert blanket.trait_path == "Batcher"
    assert blanket.impl_type == "T"


def test_free_fn_result_type():
    code = "fn check_amount(amount: i64) -> Result<(), anyhow::Error> {\n    Ok(())\n}\n"
    (item,) = rustsrc.parse_items(code)
    fn = item.fn
    assert fn.name == "check_amount"
    assert fn.params == [("amount", "i64")]
    assert rustsrc.normalize_rust(fn.ret) == "Result<(),anyhow::Error>"


def test_strip_fn_bodies():
    stripped = rustsrc.strip_fn_bodies(IMPL)
    assert "match" not in stripped
    assert "fn entry_count(&self) -> i64" in stripped
    # one line of signature, zero body lines
    assert stripped.count("{") == 1  # only the impl block brace remains


def test_set_item_visibility_inserts_pub_crate():
    code = "struct Hidden {\n    n: i64,\n}\n"
    out = rustsrc.set_item_visibility(code, "Hidden", "pub(crate)", public_fields=True)
    assert out.startswith("pub(crate) struct Hidden")
    assert "pub n: i64" in out


def test_set_item_visibility_upgrades_to_pub():
    code = "pub(crate) fn helper() -> i64 { 1 }"
    out = rustsrc.set_item_visibility(code, "helper", "pub")
    assert out.startswith("pub fn helper")


def test_set_item_visibility_keeps_existing_pub():
    code = "pub fn f() {}\n"
    assert rustsrc.set_item_visibility(code, "f", "pub(crate)") == code


def test_unparseable_code_raises():
    with pytest.raises(ParseViolation):
        rustsrc.parse_items("fn broken( {")


def test_find_fn_in_impl():
    fn = rustsrc.find_fn(IMPL, "entry_count")
    assert fn is not None and fn.ret == "i64"


def test_normalized_signature_ignores_spacing():
    a = rustsrc.find_fn("fn f(x: i64) -> bool { true }")
    b = rustsrc.find_fn("fn f(x:i64)->bool { false }")
    assert a.normalized_signature() == b.normalized_signature()
