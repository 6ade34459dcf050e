package names

import (
	"fmt"
	"strings"
)

type NameParts struct {
	Salutation string
	First      string
	Last       string
}

type ParseError struct {
	Input string
}

func (e *ParseError) Error() string {
	return fmt.Sprintf("cannot parse name %q", e.Input)
}

type Labeler interface {
	Label() string
}

type Tagged interface {
	Label() string
}

func (p *NameParts) Label() string {
	if p.Salutation == "" {
		return p.First
	}
	return fmt.Sprintf("%s %s", p.Salutation, p.First)
}

func splitWords(full string) []string {
	return strings.Fields(full)
}

func Parse(full string) (NameParts, error) {
	words := splitWords(full)
	if len(words) == 0 {
		return NameParts{}, &ParseError{Input: full}
	}
	parts := NameParts{}
	rest := []string{}
	for i, w := range words {
		if i == 0 && isSalutation(w) {
			parts.Salutation = strings.ToLower(w)
		} else {
			rest = append(rest, w)
		}
	}
	if len(rest) == 0 {
		return NameParts{}, &ParseError{Input: full}
	}
	parts.First = rest[0]
	if len(rest) > 1 {
		parts.Last = rest[len(rest)-1]
	}
	return parts, nil
}

func FormatLast(full string) (string, error) {
	parts, err := Parse(full)
	if err != nil {
		return "", err
	}
	if parts.Last == "" {
		return strings.ToUpper(parts.First), nil
	}
	return fmt.Sprintf("%s, %s", strings.ToUpper(parts.Last), parts.First), nil
}

func HasLast(full string) bool {
	parts, err := Parse(full)
	if err != nil {
		return false
	}
	return parts.Last != ""
}

func Greet(full string) string {
	parts, err := Parse(full)
	if err != nil {
		return "hello"
	}
	return fmt.Sprintf("hello %s", parts.Label())
}
