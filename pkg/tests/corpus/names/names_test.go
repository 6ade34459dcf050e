package names

import "testing"

func TestParse(t *testing.T) {
	p, err := Parse("Dr Ada Lovelace")
	if err != nil || p.Salutation != "dr" || p.First != "Ada" || p.Last != "Lovelace" {
		t.Errorf("bad parse %+v", p)
	}
	p, err = Parse("Grace Hopper")
	if err != nil || p.Salutation != "" || p.First != "Grace" || p.Last != "Hopper" {
		t.Errorf("bad plain parse %+v", p)
	}
	p, err = Parse("Prince")
	if err != nil || p.First != "Prince" || p.Last != "" {
		t.Errorf("bad mononym parse %+v", p)
	}
	if _, err := Parse("   "); err == nil {
		t.Errorf("blank input must fail")
	}
	if _, err := Parse("mr"); err == nil {
		t.Errorf("salutation-only input must fail")
	}
}

func TestFormatting(t *testing.T) {
	if s, err := FormatLast("Dr Ada Lovelace"); err != nil || s != "LOVELACE, Ada" {
		t.Errorf("bad format %q", s)
	}
	if s, err := FormatLast("Prince"); err != nil || s != "PRINCE" {
		t.Errorf("bad mononym format %q", s)
	}
	if _, err := FormatLast(""); err == nil {
		t.Errorf("empty format must fail")
	}
	if !HasLast("Grace Hopper") {
		t.Errorf("expected a last name")
	}
	if HasLast("Prince") {
		t.Errorf("mononym has no last name")
	}
	if HasLast("") {
		t.Errorf("unparseable has no last name")
	}
	if g := Greet("Dr Ada Lovelace"); g != "hello dr Ada" {
		t.Errorf("bad greeting %q", g)
	}
	if g := Greet(""); g != "hello" {
		t.Errorf("bad fallback greeting %q", g)
	}
}

func TestLabel(t *testing.T) {
	p := &NameParts{Salutation: "ms", First: "Grace", Last: "Hopper"}
	if p.Label() != "ms Grace" {
		t.Errorf("bad label %q", p.Label())
	}
	q := &NameParts{First: "Prince"}
	if q.Label() != "Prince" {
		t.Errorf("bad bare label %q", q.Label())
	}
}

func TestSalutations(t *testing.T) {
	if !isSalutation("Dr") {
		t.Errorf("Dr is a salutation")
	}
	if isSalutation("Ada") {
		t.Errorf("Ada is not a salutation")
	}
	if Normalize("  Dr Ada  ") != "dr ada" {
		t.Errorf("bad normalize")
	}
	n := CountSalutations([]string{"Dr Ada Lovelace", "Grace Hopper", "ms Grace"})
	if n != 2 {
		t.Errorf("bad salutation count %d", n)
	}
	if CountSalutations(nil) != 0 {
		t.Errorf("nil counts to zero")
	}
	if TooLong("a b c") {
		t.Errorf("three words is fine")
	}
	if !TooLong("a b c d e f g h i") {
		t.Errorf("nine words is too long")
	}
	if e := (&ParseError{Input: "xy"}).Error(); e != "cannot parse name \"xy\"" {
		t.Errorf("bad error text %q", e)
	}
}
