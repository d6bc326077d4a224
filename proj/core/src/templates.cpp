#include "freqdoc/instructions.hpp"

namespace freqdoc {

const TemplateBank& default_bank() {
  static const TemplateBank bank{
      .recognize =
          {
              "Extract all the text in <term>.",
              "Can you identify the words in <term>?",
              "Tell me the text you see in <term>.",
              "What's written in <term>?",
              "Decode the text from <term>.",
              "Reveal the text in <term> for me.",
              "Detail the text present in <term>.",
              "Elaborate on the words in <term>.",
              "Illuminate me with the text from <term>.",
              "Narrate the words you find in <term>.",
              "Can you spell out the text from <term>?",
              "I'd like to know the words in <term>.",
              "Dissect <term> and tell me its text.",
              "I'm curious about the text in <term>. What is it?",
              "Help me decipher the words in <term>.",
              "Shed light on the text of <term>.",
              "Convey the written part of <term> to me.",
              "Identify the text in <term>.",
              "What's the text in <term>.",
              "Recognize all the text in <term>.",
          },
      .detect =
          {
              "Output all the text's locations in <term>.",
              "Where are the texts located in <term>?",
              "Locate the texts in <term> for me.",
              "Highlight the positions of all the texts in <term>.",
              "I need the coordinates of the texts in <term>.",
              "Show me the regions with texts in <term>.",
              "Determine the areas with text in <term>.",
              "Can you pinpoint the text locations in <term>?",
              "Map out the texts in <term> for me.",
              "Display the text positions in <term>.",
          },
      .spot =
          {
              "Recognize all the text in <term> and return their positions [x1, y1, x2, y2].",
              "Extract all the text in <term> and return their coordinates in the format of [x1, y1, x2, y2].",
              "Identify the text in <term> and return their [x1, y1, x2, y2] coordinates.",
              "Identify the text in <term> and return their positions in the format of [x1, y1, x2, y2].",
              "Recognize all the text in <term> return their coordinates in the format of [x1, y1, x2, y2].",
              "Detect the text in <term> and return their coordinates in the format of [x1, y1, x2, y2].",
              "Find all the text in <term> and return their coordinates in the format of [x1, y1, x2, y2].",
              "Find all the text in <term> and return their positions represented in the format of [x1, y1, x2, y2].",
              "Parse all the text in <term> and return their coordinates in the format of [x1, y1, x2, y2].",
              "Interpret all text in <term> and output their coordinates in the format [x1, y1, x2, y2].",
          },
      .read_paragraph =
          {
              "What text is inside the region <box> in <term>?",
              "Tell me about the content in the area marked as <box> of <term>.",
              "I'm curious about the text in the section denoted by <box> of <term>.",
              "What does <term> say in the area outlined by <box>?",
              "Decipher the words within the space defined by <box> in <term>.",
              "Can you read the text from the section specified as <box> in <term>.",
              "Reveal the content of the region marked as <box> in <term>.",
              "Extract the words from the portion designated by <box> in <term>.",
              "I'd like to know the text from the highlighted box given by <box> in <term>.",
              "Decode the inscription inside the region defined by <box> in <term>.",
          },
      .read_full =
          {
              "Give a detailed reading of <term>.",
              "Can you provide a full reading from <term>.",
              "Read aloud the text from <term>.",
              "Convey the entire content of <term> to me.",
              "I'd like a comprehensive reading of <term>.",
              "Recite the content from <term> for me.",
              "Provide a transcript of the text from <term>.",
              "I want to hear the text from <term>.",
              "Narrate the entire text of <term> for me.",
              "Please read out the full text from <term>.",
          },
      .caption =
          {
              "Describe <term> briefly.",
              "Give a short caption for <term>.",
              "Summarize what <term> shows.",
              "What is depicted in <term>?",
              "Write a one-sentence description of <term>.",
          },
      .determiners = {"this", "the"},
      .nouns = {"image", "photo", "picture", "shot", "frame", "pic"},
  };
  return bank;
}

}  // namespace freqdoc
