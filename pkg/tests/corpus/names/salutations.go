package names

import "strings"

var salutations []string = seedSalutations()

const maxWords = 8

func seedSalutations() []string {
	out := []string{}
	out = append(out, "mr")
	out = append(out, "ms")
	out = append(out, "dr")
	return out
}

func isSalutation(word string) bool {
	lower := strings.ToLower(word)
	for _, s := range salutations {
		if s == lower {
			return true
		}
	}
	return false
}

func Normalize(full string) string {
	return strings.TrimSpace(strings.ToLower(full))
}

func CountSalutations(fulls []string) int {
	count := 0
	for _, f := range fulls {
		words := splitWords(f)
		if len(words) > 0 {
			if isSalutation(words[0]) {
				count++
			}
		}
	}
	return count
}

func TooLong(full string) bool {
	return len(splitWords(full)) > maxWords
}
